//! Repeated molecule-level k-fold splits and the MMP sets derived from them.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chem::GraphKey;
use crate::mmp::{AcClass, MmpRecord};

/// Independent generator for stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// One train/test partition of compound indices; `i` and `j` are 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoleculeSplit {
    pub i: usize,
    pub j: usize,
    pub d_train: Vec<usize>,
    pub d_test: Vec<usize>,
}

/// `m` shuffles of `0..n`, each cut into `k` folds by position modulo `k`.
/// Repetition `i` depends only on `(master_seed, i)`.
pub fn split_molecules(n: usize, k: usize, m: usize, master_seed: u64) -> Vec<MoleculeSplit> {
    assert!(k >= 2 && m >= 1 && n >= k, "need k >= 2, m >= 1, n >= k");
    let mut out = Vec::with_capacity(k * m);
    for i in 1..=m {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(master_seed, i as u64));
        let mut fold = vec![0usize; n];
        for (pos, &c) in order.iter().enumerate() {
            fold[c] = pos % k;
        }
        for j in 1..=k {
            let d_test: Vec<usize> = (0..n).filter(|&c| fold[c] == j - 1).collect();
            let d_train: Vec<usize> = (0..n).filter(|&c| fold[c] != j - 1).collect();
            out.push(MoleculeSplit { i, j, d_train, d_test });
        }
    }
    out
}

/// The parts of an MMP that set membership depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRef {
    pub mmp_id: usize,
    pub compound_1: usize,
    pub compound_2: usize,
    pub core: GraphKey,
}

impl PairRef {
    pub fn of(m: &MmpRecord) -> PairRef {
        PairRef {
            mmp_id: m.mmp_id,
            compound_1: m.index_1,
            compound_2: m.index_2,
            core: m.core_key,
        }
    }
}

/// AC and non-AC pairs; half-ACs take no part in evaluation.
pub fn labeled_pairs(mmps: &[MmpRecord]) -> Vec<PairRef> {
    mmps.iter().filter(|m| m.ac_class != AcClass::HalfAc).map(PairRef::of).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitPlan {
    pub i: usize,
    pub j: usize,
    pub d_train: Vec<usize>,
    pub d_test: Vec<usize>,
    pub m_train: Vec<usize>,
    pub m_inter: Vec<usize>,
    pub m_test: Vec<usize>,
    pub m_cores: Vec<usize>,
    pub c_train: BTreeSet<GraphKey>,
}

pub fn derive_mmp_sets(split: &MoleculeSplit, n_compounds: usize, pairs: &[PairRef]) -> SplitPlan {
    let mut in_train = vec![false; n_compounds];
    for &c in &split.d_train {
        in_train[c] = true;
    }
    let (mut m_train, mut m_inter, mut m_test) = (Vec::new(), Vec::new(), Vec::new());
    let mut c_train = BTreeSet::new();
    for p in pairs {
        match (in_train[p.compound_1], in_train[p.compound_2]) {
            (true, true) => {
                m_train.push(p.mmp_id);
                c_train.insert(p.core);
            }
            (false, false) => m_test.push(p.mmp_id),
            _ => {
                m_inter.push(p.mmp_id);
                c_train.insert(p.core);
            }
        }
    }
    let test_set: BTreeSet<usize> = m_test.iter().copied().collect();
    let m_cores = pairs
        .iter()
        .filter(|p| test_set.contains(&p.mmp_id) && !c_train.contains(&p.core))
        .map(|p| p.mmp_id)
        .collect();
    SplitPlan {
        i: split.i,
        j: split.j,
        d_train: split.d_train.clone(),
        d_test: split.d_test.clone(),
        m_train,
        m_inter,
        m_test,
        m_cores,
        c_train,
    }
}

/// All `k * m` plans, ordered by `(i, j)`.
pub fn plan_trials(n_compounds: usize, mmps: &[MmpRecord], k: usize, m: usize, master_seed: u64) -> Vec<SplitPlan> {
    let pairs = labeled_pairs(mmps);
    split_molecules(n_compounds, k, m, master_seed)
        .iter()
        .map(|s| derive_mmp_sets(s, n_compounds, &pairs))
        .collect()
}

impl SplitPlan {
    /// Checks the partition and membership invariants against `pairs`.
    pub fn check(&self, n_compounds: usize, pairs: &[PairRef]) -> Result<(), String> {
        let train: BTreeSet<usize> = self.d_train.iter().copied().collect();
        let test: BTreeSet<usize> = self.d_test.iter().copied().collect();
        if train.len() != self.d_train.len() || test.len() != self.d_test.len() {
            return Err("duplicate compound in a molecule set".into());
        }
        if !train.is_disjoint(&test) {
            return Err("d_train and d_test overlap".into());
        }
        if train.len() + test.len() != n_compounds || train.union(&test).any(|&c| c >= n_compounds) {
            return Err("d_train and d_test do not cover the data set".into());
        }
        let sets = [&self.m_train, &self.m_inter, &self.m_test];
        let mut seen = BTreeSet::new();
        for s in sets {
            for &id in s.iter() {
                if !seen.insert(id) {
                    return Err(format!("MMP {id} assigned twice"));
                }
            }
        }
        if seen.len() != pairs.len() {
            return Err(format!("{} of {} labeled MMPs assigned", seen.len(), pairs.len()));
        }
        let by_id: alloc::collections::BTreeMap<usize, &PairRef> = pairs.iter().map(|p| (p.mmp_id, p)).collect();
        let inside = |id: usize| -> Result<usize, String> {
            let p = by_id.get(&id).ok_or_else(|| format!("unknown MMP {id}"))?;
            Ok(train.contains(&p.compound_1) as usize + train.contains(&p.compound_2) as usize)
        };
        for (set, want) in [(&self.m_train, 2), (&self.m_inter, 1), (&self.m_test, 0)] {
            for &id in set.iter() {
                if inside(id)? != want {
                    return Err(format!("MMP {id} has the wrong number of training compounds"));
                }
            }
        }
        let test_mmps: BTreeSet<usize> = self.m_test.iter().copied().collect();
        for &id in &self.m_cores {
            if !test_mmps.contains(&id) {
                return Err(format!("m_cores MMP {id} not in m_test"));
            }
            if self.c_train.contains(&by_id[&id].core) {
                return Err(format!("m_cores MMP {id} has a training core"));
            }
        }
        Ok(())
    }
}
