//! Fixed physicochemical descriptor vector.
//!
//! The list below is frozen; appending a descriptor means bumping
//! [`DESCRIPTOR_SET_VERSION`]. Every entry is computed from the molecular
//! graph alone (composition, connectivity, ring and charge flags).

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::chem::{BondOrder, Element, Molecule};

pub const DESCRIPTOR_SET_VERSION: u32 = 1;

pub const DESCRIPTOR_NAMES: [&str; 33] = [
    "mol_weight",
    "heavy_atom_count",
    "hydrogen_count",
    "carbon_count",
    "nitrogen_count",
    "oxygen_count",
    "sulfur_count",
    "phosphorus_count",
    "fluorine_count",
    "chlorine_count",
    "bromine_count",
    "iodine_count",
    "other_element_count",
    "heteroatom_count",
    "halogen_count",
    "ring_atom_count",
    "ring_bond_count",
    "cyclomatic_number",
    "aromatic_atom_count",
    "aromatic_bond_count",
    "double_bond_count",
    "triple_bond_count",
    "rotatable_bond_count",
    "hbond_donor_count",
    "hbond_acceptor_count",
    "formal_charge_sum",
    "formal_charge_abs_sum",
    "wiener_index",
    "graph_diameter",
    "degree_mean",
    "degree_variance",
    "fraction_sp3_carbon",
    "bertz_proxy",
];

pub const DESCRIPTOR_COUNT: usize = DESCRIPTOR_NAMES.len();

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DescriptorVector {
    pub values: Vec<f64>,
}

impl DescriptorVector {
    pub fn names(&self) -> &'static [&'static str] {
        &DESCRIPTOR_NAMES
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        DESCRIPTOR_NAMES.iter().position(|n| *n == name).map(|i| self.values[i])
    }
}

/// BFS distances between all atom pairs; `usize::MAX` where disconnected.
fn distance_matrix(mol: &Molecule) -> Vec<Vec<usize>> {
    let n = mol.atom_count();
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut d = vec![usize::MAX; n];
        d[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in mol.neighbors(v) {
                if d[w] == usize::MAX {
                    d[w] = d[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        out.push(d);
    }
    out
}

fn is_hbond_acceptor(mol: &Molecule, i: usize) -> bool {
    let a = mol.atom(i);
    match a.element {
        Element::O => a.formal_charge <= 0,
        // pyridine-like and tertiary amine nitrogens; NH donors and
        // four-coordinate N are excluded
        Element::N => a.formal_charge <= 0 && a.implicit_h == 0 && mol.degree(i) < 4,
        _ => false,
    }
}

pub fn descriptor_vector(mol: &Molecule) -> DescriptorVector {
    let n = mol.atom_count();
    let count = |e: Element| mol.atoms().iter().filter(|a| a.element == e).count() as f64;
    let carbons = count(Element::C);
    let counts = [
        carbons,
        count(Element::N),
        count(Element::O),
        count(Element::S),
        count(Element::P),
        count(Element::F),
        count(Element::CL),
        count(Element::BR),
        count(Element::I),
    ];
    let heavy = mol.heavy_atom_count() as f64;
    let other = heavy - counts.iter().sum::<f64>();
    let heteroatoms = heavy - carbons;
    let halogens = mol.atoms().iter().filter(|a| a.element.is_halogen()).count() as f64;

    let hydrogens = mol.total_hydrogens() as f64;
    let mol_weight: f64 = mol
        .atoms()
        .iter()
        .map(|a| a.element.mass() + a.implicit_h as f64 * Element::H.mass())
        .sum();

    let ring_atoms = mol.atoms().iter().filter(|a| a.in_ring).count() as f64;
    let ring_bonds = mol.bonds().iter().filter(|b| b.in_ring).count() as f64;
    let cyclomatic = mol.bonds().len() as f64 - n as f64 + mol.components().len() as f64;
    let aromatic_atoms = mol.atoms().iter().filter(|a| a.aromatic).count() as f64;
    let order_count = |o: BondOrder| mol.bonds().iter().filter(|b| b.order == o).count() as f64;
    let aromatic_bonds = order_count(BondOrder::Aromatic);
    let doubles = order_count(BondOrder::Double);
    let triples = order_count(BondOrder::Triple);

    let in_triple = |i: usize| mol.neighbors(i).iter().any(|&(_, b)| mol.bond(b).order == BondOrder::Triple);
    let rotatable = mol
        .bonds()
        .iter()
        .filter(|b| {
            b.order == BondOrder::Single
                && !b.in_ring
                && mol.degree(b.a) >= 2
                && mol.degree(b.b) >= 2
                && !in_triple(b.a)
                && !in_triple(b.b)
        })
        .count() as f64;

    let donors = mol
        .atoms()
        .iter()
        .filter(|a| matches!(a.element, Element::N | Element::O) && a.implicit_h > 0)
        .count() as f64;
    let acceptors = (0..n).filter(|&i| is_hbond_acceptor(mol, i)).count() as f64;

    let charge_sum: f64 = mol.atoms().iter().map(|a| a.formal_charge as f64).sum();
    let charge_abs: f64 = mol.atoms().iter().map(|a| (a.formal_charge as f64).abs()).sum();

    let dist = distance_matrix(mol);
    let mut wiener = 0usize;
    let mut diameter = 0usize;
    for (i, row) in dist.iter().enumerate() {
        for &d in &row[i + 1..] {
            if d != usize::MAX {
                wiener += d;
                diameter = diameter.max(d);
            }
        }
    }

    let degrees: Vec<f64> = (0..n).map(|i| mol.degree(i) as f64).collect();
    let (deg_mean, deg_var) = if n == 0 {
        (0.0, 0.0)
    } else {
        let mean = degrees.iter().sum::<f64>() / n as f64;
        let var = degrees.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        (mean, var)
    };

    let sp3_carbons = (0..n)
        .filter(|&i| {
            let a = mol.atom(i);
            a.element == Element::C
                && !a.aromatic
                && mol.neighbors(i).iter().all(|&(_, b)| mol.bond(b).order == BondOrder::Single)
        })
        .count() as f64;
    let fsp3 = if carbons > 0.0 { sp3_carbons / carbons } else { 0.0 };

    // eta = number of adjacent bond pairs; complexity grows with eta and
    // with the diversity of atom types
    let eta: f64 = degrees.iter().map(|d| d * (d - 1.0) / 2.0).sum();
    let atom_types: BTreeSet<(u8, bool)> = mol
        .atoms()
        .iter()
        .map(|a| (a.element.atomic_number(), a.aromatic))
        .collect();
    let bertz = eta * libm::log(1.0 + eta) + atom_types.len() as f64 * libm::log(1.0 + heavy);

    let mut values = Vec::with_capacity(DESCRIPTOR_COUNT);
    values.extend([mol_weight, heavy, hydrogens]);
    values.extend(counts);
    values.extend([other, heteroatoms, halogens]);
    values.extend([ring_atoms, ring_bonds, cyclomatic, aromatic_atoms, aromatic_bonds, doubles, triples]);
    values.extend([rotatable, donors, acceptors, charge_sum, charge_abs]);
    values.extend([wiener as f64, diameter as f64, deg_mean, deg_var, fsp3, bertz]);
    debug_assert_eq!(values.len(), DESCRIPTOR_COUNT);
    DescriptorVector { values }
}
