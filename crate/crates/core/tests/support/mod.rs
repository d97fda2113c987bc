#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod gradcheck;
pub mod oracle;

use cliffbench_core::chem::{BondOrder, Molecule};
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;

/// Drug-like and edge-case molecules used across integration tests.
pub const CORPUS: &[&str] = &[
    "CCO",
    "c1ccccc1",
    "Cc1ccccc1",
    "CC(C)(C)C",
    "CC(=O)Oc1ccccc1C(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "O=C(O)c1ccccc1O",
    "c1ccc2c(c1)ccc1ccccc12",
    "C1CCC2(CC1)CCCC2",
    "OC1C2CC3CC1CC(C2)C3",
    "c1ccc(-c2ccccc2)cc1",
    "[O-][n+]1ccccc1",
    "C[N+](C)(C)CCO",
    "N[C@@H](Cc1ccccc1)C(=O)O",
    "C[C@H](N)C(=O)O",
    "FC(F)(F)c1ccc(Cl)cc1",
    "COc1ccc2[nH]cc(CCN)c2c1",
    "O=S(=O)(N)c1ccc(N)cc1",
    "C#Cc1ccccc1",
    "c1ccc2c(c1)Cc1ccccc1-2",
    "CC1=CC(=O)C=CC1=O",
    "c1ccsc1",
    "c1ccoc1",
    "c1cc[nH]c1",
    "Brc1cccnc1",
    "CCN(CC)C(=O)C1CN(C)C2Cc3c[nH]c4cccc(c34)C2=C1",
    "CC12CCC3C(CCC4=CC(=O)CCC34C)C1CCC2O",
    "C1CC1",
    "C1CCCCCCCCCCC1",
    "O=C1NC(=O)C(N1)(c1ccccc1)c1ccccc1",
    "Clc1ccc(cc1)C(c1ccccc1)N1CCNCC1",
    "CC(C)NCC(O)COc1cccc2ccccc12",
    "OCC1OC(O)C(O)C(O)C1O",
    "C1=CC=CC=C1",
    "CS(C)=O",
    "[NH3+]CC([O-])=O",
    "c1ccc2nc3ccccc3cc2c1",
];

pub type MolGraph = UnGraph<(u8, i8, bool, u8), u8>;

pub fn to_graph(mol: &Molecule) -> MolGraph {
    let mut g = MolGraph::default();
    let nodes: Vec<_> = mol
        .atoms()
        .iter()
        .map(|a| g.add_node((a.element.atomic_number(), a.formal_charge, a.aromatic, a.implicit_h)))
        .collect();
    for b in mol.bonds() {
        let code = match b.order {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        };
        g.add_edge(nodes[b.a], nodes[b.b], code);
    }
    g
}

/// Exhaustive labelled-graph isomorphism, independent of canonicalisation.
pub fn isomorphic(a: &Molecule, b: &Molecule) -> bool {
    if a.atom_count() != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    is_isomorphic_matching(&to_graph(a), &to_graph(b), |x, y| x == y, |x, y| x == y)
}

/// `id,smiles,value,unit` rows of a bundled CSV file.
pub fn read_raw(path: &str) -> Vec<cliffbench_core::curation::RawRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            cliffbench_core::curation::RawRecord {
                id: f[0].into(),
                smiles: f[1].into(),
                activity_value: f[2].parse().unwrap(),
                activity_unit: f[3].parse().unwrap(),
            }
        })
        .collect()
}

/// The MMP corpus; resolved through `crates/` so that sibling crates
/// including this module find it too.
pub fn corpus_path() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/mmp_corpus.csv")
}
