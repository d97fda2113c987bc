//! Random forest of variance-reduction regression trees.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::ModelError;
use crate::split::stream_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForestParams {
    pub n_trees: usize,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features tried per split, in (0, 1].
    pub max_features: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 0,
            min_samples_leaf: 1,
            max_features: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Threshold between distinct `a < b` with `a <= t < b`; the plain midpoint
/// rounds up to `b` when the two are adjacent floats.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    n_try: usize,
    pairs: Vec<(f64, f64)>,
}

impl Builder<'_> {
    /// Best split on one feature; `score = S_l^2/n_l + S_r^2/n_r`, larger is
    /// better. Thresholds are midpoints between consecutive distinct values.
    fn scan_feature(&mut self, samples: &[usize], f: usize, best: &mut Option<Best>) {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = samples.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &s in samples {
            let v = self.x[s][f];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo < hi) {
            return;
        }
        let total: f64 = samples.iter().map(|&s| self.y[s]).sum();
        let consider = |best: &mut Option<Best>, sum_l: f64, n_l: usize, threshold: f64| {
            let n_r = n - n_l;
            if n_l < min_leaf || n_r < min_leaf {
                return;
            }
            let sum_r = total - sum_l;
            let score = sum_l * sum_l / n_l as f64 + sum_r * sum_r / n_r as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                *best = Some(Best {
                    score,
                    feature: f,
                    threshold,
                });
            }
        };
        // two-valued features (fingerprint bits) need no sort
        let mut two_valued = true;
        let (mut sum_l, mut n_l) = (0.0, 0usize);
        for &s in samples {
            let v = self.x[s][f];
            if v == lo {
                sum_l += self.y[s];
                n_l += 1;
            } else if v != hi {
                two_valued = false;
                break;
            }
        }
        if two_valued {
            consider(best, sum_l, n_l, midpoint(lo, hi));
            return;
        }
        self.pairs.clear();
        self.pairs.extend(samples.iter().map(|&s| (self.x[s][f], self.y[s])));
        self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut sum_l = 0.0;
        for i in 0..n - 1 {
            sum_l += self.pairs[i].1;
            let (a, b) = (self.pairs[i].0, self.pairs[i + 1].0);
            if a < b {
                consider(best, sum_l, i + 1, midpoint(a, b));
            }
        }
    }

    fn best_split<R: Rng>(&mut self, samples: &[usize], rng: &mut R) -> Option<Best> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = if self.n_try >= d {
            (0..d).collect()
        } else {
            index::sample(rng, d, d).into_vec()
        };
        // tried features in ascending index order so ties favour the lowest
        let (first, rest) = order.split_at_mut(self.n_try.min(d));
        first.sort_unstable();
        let mut best = None;
        for &f in first.iter() {
            self.scan_feature(samples, f, &mut best);
        }
        if best.is_none() {
            // every drawn feature was constant here: keep looking
            rest.sort_unstable();
            for &f in rest.iter() {
                self.scan_feature(samples, f, &mut best);
                if best.is_some() {
                    break;
                }
            }
        }
        best
    }

    fn build<R: Rng>(&mut self, samples: Vec<usize>, rng: &mut R) -> Tree {
        let mut nodes = vec![Node::Leaf(0.0)];
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, samples, 0usize)];
        while let Some((slot, samples, depth)) = stack.pop() {
            let n = samples.len();
            let mean = samples.iter().map(|&s| self.y[s]).sum::<f64>() / n as f64;
            let pure = samples.iter().all(|&s| self.y[s] == self.y[samples[0]]);
            let depth_ok = self.params.max_depth == 0 || depth < self.params.max_depth;
            let big_enough = n >= 2 * self.params.min_samples_leaf.max(1);
            let split = if !pure && depth_ok && big_enough {
                self.best_split(&samples, rng)
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf(mean),
                Some(b) => {
                    let (left, right): (Vec<usize>, Vec<usize>) =
                        samples.iter().partition(|&&s| self.x[s][b.feature] <= b.threshold);
                    let (li, ri) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf(0.0));
                    nodes.push(Node::Leaf(0.0));
                    nodes[slot] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left: li,
                        right: ri,
                    };
                    stack.push((ri, right, depth + 1));
                    stack.push((li, left, depth + 1));
                }
            }
        }
        Tree { nodes }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Forest {
    pub params: ForestParams,
    trees: Vec<Tree>,
}

impl Forest {
    /// Tree `t` draws from its own stream `(seed, t + 1)`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: ForestParams) -> Result<Forest, ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        if x.len() != y.len() {
            return Err(ModelError::Length(x.len(), y.len()));
        }
        if params.n_trees == 0 {
            return Err(ModelError::Hyperparameter("n_trees must be at least 1"));
        }
        if !(params.max_features > 0.0 && params.max_features <= 1.0) {
            return Err(ModelError::Hyperparameter("max_features must be in (0, 1]"));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(ModelError::Length(d, 0));
        }
        let n_try = ((params.max_features * d as f64) as usize).clamp(1, d.max(1));
        let mut builder = Builder {
            x,
            y,
            params: &params,
            n_try,
            pairs: Vec::new(),
        };
        let n = x.len();
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = stream_rng(params.seed, t as u64 + 1);
                let samples: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                builder.build(samples, &mut rng)
            })
            .collect();
        Ok(Forest { params, trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).sin() + (i % 3) as f64).collect();
        (x, y)
    }

    #[test]
    fn constant_labels() {
        let (x, _) = toy();
        let f = Forest::fit(&x, &[2.5; 20], ForestParams::default()).unwrap();
        assert_eq!(f.predict(&[3.0, 1.0]), 2.5);
        assert_eq!(f.predict(&[-100.0, 9.0]), 2.5);
    }

    #[test]
    fn single_full_tree_interpolates() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let f = Forest::fit(&x, &y, p).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert_eq!(f.predict(r), *t);
        }
    }

    #[test]
    fn adjacent_float_values_split_cleanly() {
        let a = 0.3f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(a + (b - a) / 2.0, b);
        assert_eq!(midpoint(a, b), a);
        let x = vec![vec![a], vec![b], vec![a], vec![b]];
        let y = [1.0, 2.0, 1.0, 2.0];
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let f = Forest::fit(&x, &y, p).unwrap();
        assert_eq!(f.predict(&[a]), 1.0);
        assert_eq!(f.predict(&[b]), 2.0);
    }

    #[test]
    fn xor_is_split_despite_zero_first_gain() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..ForestParams::default()
        };
        let f = Forest::fit(&x, &y, p).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert_eq!(f.predict(r), *t);
        }
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 10,
            max_features: 0.5,
            seed: 3,
            ..ForestParams::default()
        };
        assert_eq!(Forest::fit(&x, &y, p).unwrap(), Forest::fit(&x, &y, p).unwrap());
    }

    #[test]
    fn min_leaf_and_depth() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_depth: 1,
            ..ForestParams::default()
        };
        assert_eq!(Forest::fit(&x, &y, p).unwrap().trees()[0].node_count(), 3);
        let p = ForestParams {
            n_trees: 1,
            bootstrap: false,
            min_samples_leaf: 20,
            ..ForestParams::default()
        };
        assert_eq!(Forest::fit(&x, &y, p).unwrap().trees()[0].node_count(), 1);
    }
}
