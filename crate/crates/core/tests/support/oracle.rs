//! Brute-force MMP search that matches cores by graph isomorphism instead
//! of canonical SMILES.

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use cliffbench_core::chem::{write_canonical_smiles, BondOrder, Element, Molecule};
use cliffbench_core::curation::{curate, CompoundRecord};
use cliffbench_core::mmp::{build_mmps, AcClass, MmpRecord};
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;

type Labelled = UnGraph<(u8, i8, bool, u8), u8>;

struct Piece {
    graph: Labelled,
    heavy: usize,
    /// Sorted node labels, a cheap necessary condition for isomorphism.
    signature: Vec<(u8, i8, bool, u8)>,
}

struct Cut {
    core: Piece,
    variable_heavy: usize,
    keep: Vec<usize>,
    attach: (usize, usize),
}

fn bond_code(o: BondOrder) -> u8 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

/// Atoms reachable from `start` without crossing bond `skip`.
fn reach(mol: &Molecule, start: usize, skip: usize) -> Vec<bool> {
    let mut seen = vec![false; mol.atom_count()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        for (bi, b) in mol.bonds().iter().enumerate() {
            if bi == skip || (b.a != a && b.b != a) {
                continue;
            }
            let o = if b.a == a { b.b } else { b.a };
            if !seen[o] {
                seen[o] = true;
                queue.push_back(o);
            }
        }
    }
    seen
}

fn piece(mol: &Molecule, keep: &[usize], attach_atom: usize) -> Piece {
    let mut g = Labelled::default();
    let mut map = BTreeMap::new();
    for &a in keep {
        let at = mol.atom(a);
        map.insert(a, g.add_node((at.element.atomic_number(), at.formal_charge, at.aromatic, at.implicit_h)));
    }
    for b in mol.bonds() {
        if let (Some(&x), Some(&y)) = (map.get(&b.a), map.get(&b.b)) {
            g.add_edge(x, y, bond_code(b.order));
        }
    }
    let dummy = g.add_node((0, 0, false, 0));
    g.add_edge(map[&attach_atom], dummy, 1);
    let mut signature: Vec<_> = g.node_weights().copied().collect();
    signature.sort();
    let heavy = keep.iter().filter(|&&a| mol.atom(a).element != Element::H).count();
    Piece { graph: g, heavy, signature }
}

fn cuts(mol: &Molecule) -> Vec<Cut> {
    let mut out = Vec::new();
    for (bi, b) in mol.bonds().iter().enumerate() {
        if b.order != BondOrder::Single {
            continue;
        }
        let side = reach(mol, b.a, bi);
        if side[b.b] {
            // ring bond
            continue;
        }
        let a_side: Vec<usize> = (0..mol.atom_count()).filter(|&i| side[i]).collect();
        let b_side: Vec<usize> = (0..mol.atom_count()).filter(|&i| !side[i]).collect();
        for (keep, other, at, nb) in [(&a_side, &b_side, b.a, b.b), (&b_side, &a_side, b.b, b.a)] {
            let variable_heavy = other.iter().filter(|&&x| mol.atom(x).element != Element::H).count();
            out.push(Cut {
                core: piece(mol, keep, at),
                variable_heavy,
                keep: keep.clone(),
                attach: (at, nb),
            });
        }
    }
    out
}

fn allowed(core: usize, v1: usize, v2: usize) -> bool {
    v1 <= 13 && v2 <= 13 && v1.abs_diff(v2) <= 8 && core >= 2 * v1 && core >= 2 * v2
}

fn class(a1: f64, a2: f64) -> AcClass {
    let d = (a1 - a2).abs();
    if d >= 2.0 - 1e-9 {
        AcClass::Ac
    } else if d <= 1.0 + 1e-9 {
        AcClass::NonAc
    } else {
        AcClass::HalfAc
    }
}

struct OracleHit {
    core_smiles: String,
    class: AcClass,
    tied_classes: usize,
}

fn oracle(compounds: &[CompoundRecord]) -> BTreeMap<(usize, usize), OracleHit> {
    let all: Vec<Vec<Cut>> = compounds.iter().map(|c| cuts(&c.mol)).collect();
    let mut out = BTreeMap::new();
    for i in 0..compounds.len() {
        for j in i + 1..compounds.len() {
            let mut best: Vec<&Cut> = Vec::new();
            let mut best_heavy = 0;
            for ci in &all[i] {
                for cj in &all[j] {
                    let (p, q) = (&ci.core, &cj.core);
                    if p.heavy != q.heavy || p.signature != q.signature || p.graph.edge_count() != q.graph.edge_count() {
                        continue;
                    }
                    if !allowed(p.heavy, ci.variable_heavy, cj.variable_heavy) || p.heavy < best_heavy {
                        continue;
                    }
                    if !is_isomorphic_matching(&p.graph, &q.graph, |x, y| x == y, |x, y| x == y) {
                        continue;
                    }
                    if p.heavy > best_heavy {
                        best_heavy = p.heavy;
                        best.clear();
                    }
                    best.push(ci);
                }
            }
            if best.is_empty() {
                continue;
            }
            // distinct core isomorphism classes among the maximal ones
            let mut reps: Vec<&Cut> = Vec::new();
            for c in &best {
                let known = reps.iter().any(|r| {
                    is_isomorphic_matching(&r.core.graph, &c.core.graph, |x, y| x == y, |x, y| x == y)
                });
                if !known {
                    reps.push(c);
                }
            }
            let mol = &compounds[i].mol;
            let core_smiles = reps
                .iter()
                .map(|c| write_canonical_smiles(&mol.fragment(&c.keep, Some(c.attach))))
                .min()
                .unwrap();
            out.insert(
                (i, j),
                OracleHit {
                    core_smiles,
                    class: class(compounds[i].a, compounds[j].a),
                    tied_classes: reps.len(),
                },
            );
        }
    }
    out
}

/// Checks `mmps` (pairs, chosen cores, labels) against the oracle run on
/// `compounds`.
pub fn compare(compounds: &[CompoundRecord], mmps: &[MmpRecord]) -> Result<(), String> {
    let expected = oracle(compounds);
    let got: BTreeMap<(usize, usize), _> =
        mmps.iter().map(|m| ((m.index_1.min(m.index_2), m.index_1.max(m.index_2)), m)).collect();
    if got.len() != mmps.len() {
        return Err("duplicate pair in build_mmps output".into());
    }
    let missing: Vec<_> = expected.keys().filter(|k| !got.contains_key(k)).collect();
    let extra: Vec<_> = got.keys().filter(|k| !expected.contains_key(k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(format!("missing {missing:?}, extra {extra:?}"));
    }
    for (k, hit) in &expected {
        let m = got[k];
        if m.core_smiles != hit.core_smiles {
            return Err(format!("pair {k:?}: core {} vs oracle {}", m.core_smiles, hit.core_smiles));
        }
        if m.ac_class != hit.class {
            return Err(format!("pair {k:?}: label {:?} vs oracle {:?}", m.ac_class, hit.class));
        }
    }
    Ok(())
}

/// Compares `build_mmps` on the bundled corpus with the oracle.
pub fn check_corpus() -> Result<String, String> {
    let raw = super::read_raw(super::corpus_path());
    if raw.len() > 200 {
        return Err(format!("corpus has {} molecules", raw.len()));
    }
    let curated = curate(&raw);
    if curated.compounds.len() != raw.len() {
        return Err("curation changed the corpus".into());
    }
    let compounds = curated.compounds;

    let start = Instant::now();
    let mmps = build_mmps(&compounds);
    let elapsed = start.elapsed();

    compare(&compounds, &mmps)?;
    let classes = [AcClass::Ac, AcClass::HalfAc, AcClass::NonAc].map(|c| mmps.iter().filter(|m| m.ac_class == c).count());
    if classes.contains(&0) {
        return Err(format!("corpus does not exercise every class: {classes:?}"));
    }
    if elapsed.as_secs_f64() >= 60.0 {
        return Err(format!("took {elapsed:?}"));
    }
    let ties = oracle(&compounds).values().filter(|h| h.tied_classes > 1).count();
    Ok(format!(
        "{} molecules, {} MMPs (AC/half/non {classes:?}), {ties} tied maximal cores, {elapsed:.2?}",
        compounds.len(),
        mmps.len()
    ))
}
