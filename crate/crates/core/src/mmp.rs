//! Matched molecular pairs from single exocyclic cuts.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::chem::{write_canonical_smiles, BondOrder, GraphKey, Molecule};
use crate::curation::CompoundRecord;

pub const MAX_VARIABLE_HEAVY: usize = 13;
pub const MAX_VARIABLE_DIFFERENCE: usize = 8;
pub const CORE_TO_VARIABLE_RATIO: usize = 2;
/// log10 difference at or above which an MMP is an activity cliff.
pub const AC_THRESHOLD: f64 = 2.0;
/// log10 difference at or below which an MMP is a non-cliff.
pub const NON_AC_THRESHOLD: f64 = 1.0;
/// Slack for floating-point noise in the threshold comparisons, so that
/// e.g. 1 nM vs 100 nM lands on AC even if the logs round unfavourably.
pub const LABEL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AcClass {
    #[cfg_attr(feature = "serde", serde(rename = "AC"))]
    Ac,
    #[cfg_attr(feature = "serde", serde(rename = "HALF_AC"))]
    HalfAc,
    #[cfg_attr(feature = "serde", serde(rename = "NON_AC"))]
    NonAc,
}

impl AcClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AcClass::Ac => "AC",
            AcClass::HalfAc => "HALF_AC",
            AcClass::NonAc => "NON_AC",
        }
    }

    pub fn parse(s: &str) -> Option<AcClass> {
        match s {
            "AC" => Some(AcClass::Ac),
            "HALF_AC" => Some(AcClass::HalfAc),
            "NON_AC" => Some(AcClass::NonAc),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PotencyDirection {
    FirstMoreActive,
    SecondMoreActive,
    /// Identical labels; excluded from potency-direction evaluation.
    Tie,
}

impl PotencyDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            PotencyDirection::FirstMoreActive => "first_more_active",
            PotencyDirection::SecondMoreActive => "second_more_active",
            PotencyDirection::Tie => "tie",
        }
    }

    pub fn parse(s: &str) -> Option<PotencyDirection> {
        match s {
            "first_more_active" => Some(PotencyDirection::FirstMoreActive),
            "second_more_active" => Some(PotencyDirection::SecondMoreActive),
            "tie" => Some(PotencyDirection::Tie),
            _ => None,
        }
    }
}

pub fn label_mmp(a1: f64, a2: f64) -> (AcClass, PotencyDirection, f64) {
    let delta = libm::fabs(a1 - a2);
    let class = if delta >= AC_THRESHOLD - LABEL_TOLERANCE {
        AcClass::Ac
    } else if delta <= NON_AC_THRESHOLD + LABEL_TOLERANCE {
        AcClass::NonAc
    } else {
        AcClass::HalfAc
    };
    let pd = if a1 > a2 {
        PotencyDirection::FirstMoreActive
    } else if a2 > a1 {
        PotencyDirection::SecondMoreActive
    } else {
        PotencyDirection::Tie
    };
    (class, pd, delta)
}

pub fn passes_constraints(core_heavy: usize, var1_heavy: usize, var2_heavy: usize) -> bool {
    core_heavy >= CORE_TO_VARIABLE_RATIO * var1_heavy.max(var2_heavy)
        && var1_heavy <= MAX_VARIABLE_HEAVY
        && var2_heavy <= MAX_VARIABLE_HEAVY
        && var1_heavy.abs_diff(var2_heavy) <= MAX_VARIABLE_DIFFERENCE
}

/// One side of a single cut, taken as the core, with the other side as the
/// variable part. Both parts carry one `*` at the cut.
#[derive(Clone, Debug)]
pub struct Fragmentation {
    pub cut_bond: usize,
    pub core: Molecule,
    pub variable: Molecule,
    pub core_smiles: String,
    pub variable_smiles: String,
    pub core_key: GraphKey,
    pub core_heavy: usize,
    pub variable_heavy: usize,
}

/// Bonds eligible for cutting: single order and on no cycle.
pub fn cuttable_bonds(mol: &Molecule) -> Vec<usize> {
    mol.bonds()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.order == BondOrder::Single && !b.in_ring)
        .map(|(i, _)| i)
        .collect()
}

/// Atoms reachable from `start` without crossing `cut`, sorted.
fn side_of(mol: &Molecule, start: usize, cut: usize) -> Vec<usize> {
    let mut seen = vec![false; mol.atom_count()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(v) = stack.pop() {
        for &(w, b) in mol.neighbors(v) {
            if b != cut && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    (0..mol.atom_count()).filter(|&i| seen[i]).collect()
}

/// Every cuttable bond yields two fragmentations: first with the side of
/// the bond's lower-indexed endpoint as core, then the reverse.
pub fn fragment_single_cuts(mol: &Molecule) -> Vec<Fragmentation> {
    let mut out = Vec::new();
    for cut in cuttable_bonds(mol) {
        let bond = mol.bond(cut);
        let (a, b) = (bond.a.min(bond.b), bond.a.max(bond.b));
        let side_a = side_of(mol, a, cut);
        let side_b = side_of(mol, b, cut);
        let part_a = mol.fragment(&side_a, Some((a, b)));
        let part_b = mol.fragment(&side_b, Some((b, a)));
        let smiles_a = write_canonical_smiles(&part_a);
        let smiles_b = write_canonical_smiles(&part_b);
        let heavy_a = part_a.heavy_atom_count();
        let heavy_b = part_b.heavy_atom_count();
        out.push(Fragmentation {
            cut_bond: cut,
            core_key: GraphKey::of_smiles(&smiles_a),
            core: part_a.clone(),
            variable: part_b.clone(),
            core_smiles: smiles_a.clone(),
            variable_smiles: smiles_b.clone(),
            core_heavy: heavy_a,
            variable_heavy: heavy_b,
        });
        out.push(Fragmentation {
            cut_bond: cut,
            core_key: GraphKey::of_smiles(&smiles_b),
            core: part_b,
            variable: part_a,
            core_smiles: smiles_b,
            variable_smiles: smiles_a,
            core_heavy: heavy_b,
            variable_heavy: heavy_a,
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmpRecord {
    pub mmp_id: usize,
    /// Positions in the compound list the pairs were built from.
    pub index_1: usize,
    pub index_2: usize,
    pub id_1: String,
    pub id_2: String,
    pub smiles_1: String,
    pub smiles_2: String,
    pub core_smiles: String,
    pub core_key: GraphKey,
    pub core_heavy: usize,
    pub var_1: String,
    pub var_2: String,
    pub a_1: f64,
    pub a_2: f64,
    pub ac_class: AcClass,
    pub pd: PotencyDirection,
    pub delta_log: f64,
    /// Distinct variable-part pairs found for the chosen core.
    pub cut_multiplicity: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MmpCounts {
    pub compounds: usize,
    pub mmps: usize,
    pub acs: usize,
    pub half_acs: usize,
    pub non_acs: usize,
}

impl MmpCounts {
    pub fn of(compounds: usize, mmps: &[MmpRecord]) -> MmpCounts {
        let n = |c| mmps.iter().filter(|m| m.ac_class == c).count();
        MmpCounts {
            compounds,
            mmps: mmps.len(),
            acs: n(AcClass::Ac),
            half_acs: n(AcClass::HalfAc),
            non_acs: n(AcClass::NonAc),
        }
    }

    /// Non-ACs per AC, `None` without ACs.
    pub fn non_ac_per_ac(&self) -> Option<f64> {
        (self.acs > 0).then(|| self.non_acs as f64 / self.acs as f64)
    }
}

struct IndexedFragment {
    compound: usize,
    variable_smiles: String,
    variable_heavy: usize,
}

struct Candidate {
    core_heavy: usize,
    core_smiles: String,
    core_key: GraphKey,
    /// (var of lower compound index, var of higher), ordered
    var_pairs: Vec<(String, String)>,
}

/// Fragments every compound, indexes fragments by core and forms one MMP
/// per compound pair at their largest shared core (ties: smallest core
/// SMILES). Output is sorted by (smiles_1, smiles_2) and ids follow that
/// order, so it does not depend on the input order.
pub fn build_mmps(compounds: &[CompoundRecord]) -> Vec<MmpRecord> {
    let fragments: Vec<Vec<Fragmentation>> = compounds.iter().map(|c| fragment_single_cuts(&c.mol)).collect();
    build_mmps_from_fragments(compounds, fragments)
}

/// As [`build_mmps`], with fragmentation already done (e.g. in parallel).
pub fn build_mmps_from_fragments(compounds: &[CompoundRecord], fragments: Vec<Vec<Fragmentation>>) -> Vec<MmpRecord> {
    assert_eq!(compounds.len(), fragments.len());
    let mut index: BTreeMap<(GraphKey, String), (usize, Vec<IndexedFragment>)> = BTreeMap::new();
    for (ci, frags) in fragments.into_iter().enumerate() {
        for f in frags {
            // a pair passes only if each side passes on its own, apart from
            // the size-difference rule
            if !passes_constraints(f.core_heavy, f.variable_heavy, f.variable_heavy) {
                continue;
            }
            let entry = index.entry((f.core_key, f.core_smiles)).or_insert((f.core_heavy, Vec::new()));
            let dup = entry
                .1
                .iter()
                .any(|e| e.compound == ci && e.variable_smiles == f.variable_smiles);
            if !dup {
                entry.1.push(IndexedFragment {
                    compound: ci,
                    variable_smiles: f.variable_smiles,
                    variable_heavy: f.variable_heavy,
                });
            }
        }
    }

    let mut best: BTreeMap<(usize, usize), Candidate> = BTreeMap::new();
    for ((key, core_smiles), (core_heavy, members)) in &index {
        for (x, fx) in members.iter().enumerate() {
            for fy in &members[x + 1..] {
                if fx.compound == fy.compound {
                    continue;
                }
                if !passes_constraints(*core_heavy, fx.variable_heavy, fy.variable_heavy) {
                    continue;
                }
                let (lo, hi) = if fx.compound < fy.compound { (fx, fy) } else { (fy, fx) };
                let pair = (lo.variable_smiles.clone(), hi.variable_smiles.clone());
                let slot = best.entry((lo.compound, hi.compound));
                use alloc::collections::btree_map::Entry;
                match slot {
                    Entry::Vacant(v) => {
                        v.insert(Candidate {
                            core_heavy: *core_heavy,
                            core_smiles: core_smiles.clone(),
                            core_key: *key,
                            var_pairs: vec![pair],
                        });
                    }
                    Entry::Occupied(mut o) => {
                        let c = o.get_mut();
                        let better =
                            *core_heavy > c.core_heavy || (*core_heavy == c.core_heavy && *core_smiles < c.core_smiles);
                        if better {
                            *c = Candidate {
                                core_heavy: *core_heavy,
                                core_smiles: core_smiles.clone(),
                                core_key: *key,
                                var_pairs: vec![pair],
                            };
                        } else if *core_smiles == c.core_smiles && !c.var_pairs.contains(&pair) {
                            c.var_pairs.push(pair);
                        }
                    }
                }
            }
        }
    }

    let mut records: Vec<MmpRecord> = best
        .into_iter()
        .map(|((i, j), mut cand)| {
            cand.var_pairs.sort();
            let (vi, vj) = cand.var_pairs[0].clone();
            let (ci, cj) = (&compounds[i], &compounds[j]);
            // orient by canonical SMILES
            let (first, second, v1, v2) = if ci.canonical_smiles <= cj.canonical_smiles {
                ((i, ci), (j, cj), vi, vj)
            } else {
                ((j, cj), (i, ci), vj, vi)
            };
            let (ac_class, pd, delta_log) = label_mmp(first.1.a, second.1.a);
            MmpRecord {
                mmp_id: 0,
                index_1: first.0,
                index_2: second.0,
                id_1: first.1.id.clone(),
                id_2: second.1.id.clone(),
                smiles_1: first.1.canonical_smiles.clone(),
                smiles_2: second.1.canonical_smiles.clone(),
                core_smiles: cand.core_smiles,
                core_key: cand.core_key,
                core_heavy: cand.core_heavy,
                var_1: v1,
                var_2: v2,
                a_1: first.1.a,
                a_2: second.1.a,
                ac_class,
                pd,
                delta_log,
                cut_multiplicity: cand.var_pairs.len(),
            }
        })
        .collect();
    records.sort_by(|x, y| (&x.smiles_1, &x.smiles_2).cmp(&(&y.smiles_1, &y.smiles_2)));
    for (k, r) in records.iter_mut().enumerate() {
        r.mmp_id = k;
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::curation::ActivityUnit;

    fn compound(id: &str, smiles: &str, a: f64) -> CompoundRecord {
        let mol = parse_smiles(smiles).unwrap();
        CompoundRecord {
            id: id.into(),
            canonical_smiles: write_canonical_smiles(&mol),
            mol,
            activity_value: libm::pow(10.0, -a),
            unit: ActivityUnit::NanoMolar,
            a,
        }
    }

    #[test]
    fn cut_counts() {
        assert!(fragment_single_cuts(&parse_smiles("c1ccccc1").unwrap()).is_empty());
        assert_eq!(fragment_single_cuts(&parse_smiles("CCO").unwrap()).len(), 4);
        assert_eq!(fragment_single_cuts(&parse_smiles("Cc1ccccc1").unwrap()).len(), 2);
        // biphenyl: the inter-ring bond is acyclic
        assert_eq!(fragment_single_cuts(&parse_smiles("c1ccc(-c2ccccc2)cc1").unwrap()).len(), 2);
        // double bonds are never cut
        assert_eq!(fragment_single_cuts(&parse_smiles("C=C").unwrap()).len(), 0);
    }

    #[test]
    fn heavy_atoms_are_conserved() {
        let mol = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        for f in fragment_single_cuts(&mol) {
            assert_eq!(f.core_heavy + f.variable_heavy, mol.heavy_atom_count());
            assert_eq!(f.core.attachment_count(), 1);
            assert_eq!(f.variable.attachment_count(), 1);
        }
    }

    #[test]
    fn constraint_boundaries() {
        assert!(passes_constraints(6, 1, 2));
        assert!(!passes_constraints(6, 1, 14));
        assert!(passes_constraints(20, 1, 9));
        assert!(!passes_constraints(20, 1, 10));
        assert!(!passes_constraints(3, 2, 1));
        assert!(passes_constraints(4, 2, 1));
    }

    #[test]
    fn labels() {
        assert_eq!(label_mmp(0.0, -2.0).0, AcClass::Ac);
        assert_eq!(label_mmp(0.0, -1.0).0, AcClass::NonAc);
        assert_eq!(label_mmp(0.0, -libm::log10(30.0)).0, AcClass::HalfAc);
        assert!((label_mmp(0.0, -libm::log10(30.0)).2 - 1.4771212547).abs() < 1e-9);
        assert_eq!(label_mmp(1.0, 2.0).1, PotencyDirection::SecondMoreActive);
        assert_eq!(label_mmp(2.0, 1.0).1, PotencyDirection::FirstMoreActive);
        assert_eq!(label_mmp(1.0, 1.0).1, PotencyDirection::Tie);
        // 1 nM vs 100 nM and 1 nM vs 10 nM through the log
        let l = |v: f64| -libm::log10(v);
        assert_eq!(label_mmp(l(1.0), l(100.0)).0, AcClass::Ac);
        assert_eq!(label_mmp(l(3.0), l(30.0)).0, AcClass::NonAc);
        assert_eq!(label_mmp(l(7.0), l(700.0)).0, AcClass::Ac);
    }

    #[test]
    fn toluene_ethylbenzene() {
        let cs = [compound("t", "Cc1ccccc1", 1.0), compound("e", "CCc1ccccc1", 3.5)];
        let mmps = build_mmps(&cs);
        assert_eq!(mmps.len(), 1);
        let m = &mmps[0];
        assert_eq!(m.core_heavy, 6);
        assert_eq!(m.core_smiles, write_canonical_smiles(&crate::chem::parse_fragment_smiles("*c1ccccc1").unwrap()));
        assert_eq!(m.ac_class, AcClass::Ac);
        let vars = [m.var_1.as_str(), m.var_2.as_str()];
        assert!(vars.contains(&"*C") && vars.contains(&"*CC"), "{vars:?}");
    }

    #[test]
    fn benzene_pairs_with_nothing() {
        let cs = [compound("b", "c1ccccc1", 1.0), compound("t", "Cc1ccccc1", 1.0)];
        assert!(build_mmps(&cs).is_empty());
    }

    #[test]
    fn largest_core_wins() {
        // differ at the chloro position only when read from one end; the
        // anisole/phenol side gives a larger core than cutting at the ring
        let cs = [compound("x", "COc1ccc(Cl)cc1", 0.0), compound("y", "COc1ccc(Br)cc1", 0.0)];
        let mmps = build_mmps(&cs);
        assert_eq!(mmps.len(), 1);
        assert_eq!(mmps[0].core_heavy, 8);
    }
}
