use alloc::vec::Vec;

use super::ModelError;
use crate::featurize::Fingerprint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum KnnMetric {
    Tanimoto,
    Euclidean,
    /// Euclidean after scaling each feature by its training standard
    /// deviation (constant features are left unscaled).
    StandardizedEuclidean,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
enum Store {
    Fingerprints(Vec<Fingerprint>),
    Dense { rows: Vec<Vec<f64>>, scale: Vec<f64> },
}

/// Unweighted k-nearest-neighbour regression; distance ties go to the
/// lower training index.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Knn {
    pub k: usize,
    pub metric: KnnMetric,
    store: Store,
    labels: Vec<f64>,
}

fn check(n: usize, labels: usize, k: usize) -> Result<(), ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyTraining);
    }
    if n != labels {
        return Err(ModelError::Length(n, labels));
    }
    if k == 0 || k > n {
        return Err(ModelError::Hyperparameter("k must be in 1..=training size"));
    }
    Ok(())
}

impl Knn {
    pub fn fit_fingerprints(fps: Vec<Fingerprint>, labels: Vec<f64>, k: usize) -> Result<Knn, ModelError> {
        check(fps.len(), labels.len(), k)?;
        Ok(Knn {
            k,
            metric: KnnMetric::Tanimoto,
            store: Store::Fingerprints(fps),
            labels,
        })
    }

    pub fn fit_dense(rows: Vec<Vec<f64>>, labels: Vec<f64>, k: usize, standardize: bool) -> Result<Knn, ModelError> {
        check(rows.len(), labels.len(), k)?;
        let d = rows[0].len();
        let mut scale = alloc::vec![1.0; d];
        if standardize {
            let n = rows.len() as f64;
            for (j, s) in scale.iter_mut().enumerate() {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / n;
                let sd = libm::sqrt(var);
                *s = if sd > 0.0 { 1.0 / sd } else { 1.0 };
            }
        }
        Ok(Knn {
            k,
            metric: if standardize {
                KnnMetric::StandardizedEuclidean
            } else {
                KnnMetric::Euclidean
            },
            store: Store::Dense { rows, scale },
            labels,
        })
    }

    fn predict_from(&self, dist: impl Fn(usize) -> f64) -> f64 {
        let mut order: Vec<(f64, usize)> = (0..self.labels.len()).map(|i| (dist(i), i)).collect();
        let k = self.k.min(order.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
        }
        // summation in index order keeps results independent of selection order
        let mut chosen: Vec<usize> = order[..k].iter().map(|x| x.1).collect();
        chosen.sort_unstable();
        chosen.iter().map(|&i| self.labels[i]).sum::<f64>() / k as f64
    }

    pub fn predict_fingerprint(&self, q: &Fingerprint) -> Result<f64, ModelError> {
        match &self.store {
            Store::Fingerprints(fps) => Ok(self.predict_from(|i| fps[i].tanimoto_distance(q))),
            Store::Dense { .. } => Err(ModelError::Representation),
        }
    }

    pub fn predict_dense(&self, q: &[f64]) -> Result<f64, ModelError> {
        match &self.store {
            Store::Dense { rows, scale } => {
                if q.len() != scale.len() {
                    return Err(ModelError::Length(q.len(), scale.len()));
                }
                Ok(self.predict_from(|i| {
                    rows[i]
                        .iter()
                        .zip(q)
                        .zip(scale)
                        .map(|((a, b), s)| {
                            let d = (a - b) * s;
                            d * d
                        })
                        .sum::<f64>()
                }))
            }
            Store::Fingerprints(_) => Err(ModelError::Representation),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_dimensional_example() {
        let knn = Knn::fit_dense(vec![vec![0.0], vec![1.0], vec![4.0]], vec![0.0, 1.0, 10.0], 2, false).unwrap();
        assert_eq!(knn.predict_dense(&[0.6]).unwrap(), 0.5);
        let all = Knn::fit_dense(vec![vec![0.0], vec![1.0], vec![4.0]], vec![0.0, 1.0, 10.0], 3, false).unwrap();
        assert!((all.predict_dense(&[100.0]).unwrap() - 11.0 / 3.0).abs() < 1e-12);
        let one = Knn::fit_dense(vec![vec![0.0], vec![1.0], vec![4.0]], vec![0.0, 1.0, 10.0], 1, true).unwrap();
        assert_eq!(one.predict_dense(&[4.0]).unwrap(), 10.0);
    }

    #[test]
    fn ties_prefer_lower_index() {
        let knn = Knn::fit_dense(vec![vec![-1.0], vec![1.0]], vec![5.0, 7.0], 1, false).unwrap();
        assert_eq!(knn.predict_dense(&[0.0]).unwrap(), 5.0);
    }

    #[test]
    fn invalid_k() {
        assert!(Knn::fit_dense(vec![vec![0.0]], vec![0.0], 2, false).is_err());
        assert!(Knn::fit_dense(vec![], vec![], 1, false).is_err());
    }
}
