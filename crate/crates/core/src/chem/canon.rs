//! Canonical atom ranking and canonical SMILES output.
//!
//! Ranks come from iterative refinement of atom invariants (element,
//! charge, degree, hydrogens, aromaticity, ring membership) with neighbour
//! ranks and bond orders. Remaining ties are broken by individualising each
//! atom of the lowest tied class in turn; among all resulting discrete
//! rankings the one whose SMILES is lexicographically smallest wins.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use super::mol::{BondOrder, Molecule, NeighborSlot, Parity};
use super::smiles::default_hydrogens;

/// Upper bound on explored tie-break leaves. Beyond it only the first
/// candidate of each further tied class is followed.
const LEAF_BUDGET: usize = 4096;

/// Result of canonicalisation: `ranks[atom]` is the atom's canonical rank
/// (0-based, all distinct) and `smiles` the canonical string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canonical {
    pub ranks: Vec<usize>,
    pub smiles: String,
}

pub fn canonicalize(mol: &Molecule) -> Canonical {
    if mol.is_empty() {
        return Canonical {
            ranks: Vec::new(),
            smiles: String::new(),
        };
    }
    let mut search = Search {
        mol,
        best: None,
        leaves: 0,
    };
    search.run(initial_labels(mol));
    let (smiles, labels) = search.best.expect("at least one leaf");
    Canonical {
        ranks: labels.into_iter().map(|l| l as usize).collect(),
        smiles,
    }
}

pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    canonicalize(mol).ranks
}

pub fn write_canonical_smiles(mol: &Molecule) -> String {
    canonicalize(mol).smiles
}

fn atom_invariant(mol: &Molecule, i: usize) -> u64 {
    let a = mol.atom(i);
    ((a.element.atomic_number() as u64) << 40)
        | (((a.formal_charge as i16 + 128) as u64) << 32)
        | ((mol.degree(i) as u64) << 24)
        | ((a.implicit_h as u64) << 16)
        | ((a.aromatic as u64) << 8)
        | (a.in_ring as u64)
}

/// Labels where every atom gets the number of atoms with a strictly
/// smaller key, so tied atoms share a label.
fn labels_from_keys<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut labels = vec![0u32; keys.len()];
    for (pos, &i) in idx.iter().enumerate() {
        labels[i] = if pos > 0 && keys[idx[pos - 1]] == keys[i] {
            labels[idx[pos - 1]]
        } else {
            pos as u32
        };
    }
    labels
}

fn class_count(labels: &[u32]) -> usize {
    let mut seen = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

fn initial_labels(mol: &Molecule) -> Vec<u32> {
    let keys: Vec<u64> = (0..mol.atom_count()).map(|i| atom_invariant(mol, i)).collect();
    labels_from_keys(&keys)
}

/// Refines labels with neighbour information until the partition is stable.
pub(crate) fn refine(mol: &Molecule, labels: &mut Vec<u32>) {
    let mut classes = class_count(labels);
    loop {
        if classes == labels.len() {
            return;
        }
        let keys: Vec<(u32, Vec<u64>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<u64> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(x, b)| ((labels[x] as u64) << 8) | mol.bond(b).order.code() as u64)
                    .collect();
                nb.sort_unstable();
                (labels[i], nb)
            })
            .collect();
        let next = labels_from_keys(&keys);
        let next_classes = class_count(&next);
        *labels = next;
        if next_classes == classes {
            return;
        }
        classes = next_classes;
    }
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<(String, Vec<u32>)>,
    leaves: usize,
}

impl<'a> Search<'a> {
    fn run(&mut self, mut labels: Vec<u32>) {
        refine(self.mol, &mut labels);
        let n = labels.len();
        let mut counts = vec![0usize; n];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        let Some(target) = (0..n).find(|&l| counts[l] > 1) else {
            self.leaves += 1;
            let smiles = write_smiles_with_ranks(self.mol, &labels);
            if self.best.as_ref().is_none_or(|(b, _)| smiles < *b) {
                self.best = Some((smiles, labels));
            }
            return;
        };
        let target = target as u32;
        let candidates: Vec<usize> = (0..n).filter(|&i| labels[i] == target).collect();
        for (k, &chosen) in candidates.iter().enumerate() {
            if k > 0 && self.leaves >= LEAF_BUDGET {
                break;
            }
            let mut next = labels.clone();
            for &other in &candidates {
                if other != chosen {
                    next[other] = target + 1;
                }
            }
            self.run(next);
        }
    }
}

/// Writes SMILES following a discrete ranking: each component starts at
/// its lowest-ranked atom and neighbours are visited in rank order.
pub fn write_smiles_with_ranks(mol: &Molecule, ranks: &[u32]) -> String {
    let n = mol.atom_count();
    let mut w = Writer {
        mol,
        ranks,
        state: vec![0u8; n],
        parent: vec![None; n],
        children: vec![Vec::new(); n],
        ring_open: vec![Vec::new(); n],
        ring_close: vec![Vec::new(); n],
        digits: BTreeDigits::default(),
        bond_digit: vec![0u32; mol.bonds().len()],
        out: String::new(),
    };
    let mut roots: Vec<usize> = (0..n).collect();
    roots.sort_by_key(|&i| ranks[i]);
    let mut first = true;
    for root in roots {
        if w.state[root] != 0 {
            continue;
        }
        w.plan(root, usize::MAX);
        if !first {
            w.out.push('.');
        }
        first = false;
        w.emit(root);
    }
    w.out
}

#[derive(Default)]
struct BTreeDigits {
    used: Vec<bool>,
}

impl BTreeDigits {
    fn take(&mut self) -> u32 {
        for d in 1..self.used.len() {
            if !self.used[d] {
                self.used[d] = true;
                return d as u32;
            }
        }
        let d = self.used.len().max(1);
        self.used.resize(d + 1, false);
        self.used[d] = true;
        d as u32
    }

    fn release(&mut self, d: u32) {
        self.used[d as usize] = false;
    }
}

struct Writer<'a> {
    mol: &'a Molecule,
    ranks: &'a [u32],
    state: Vec<u8>,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<(usize, usize)>>,
    ring_open: Vec<Vec<(usize, usize)>>,
    ring_close: Vec<Vec<(usize, usize)>>,
    digits: BTreeDigits,
    bond_digit: Vec<u32>,
    out: String,
}

impl<'a> Writer<'a> {
    fn sorted_neighbors(&self, a: usize) -> Vec<(usize, usize)> {
        let mut nbrs = self.mol.neighbors(a).to_vec();
        nbrs.sort_by_key(|&(x, _)| self.ranks[x]);
        nbrs
    }

    fn plan(&mut self, a: usize, via: usize) {
        self.state[a] = 1;
        for (nb, bond) in self.sorted_neighbors(a) {
            if bond == via {
                continue;
            }
            match self.state[nb] {
                0 => {
                    self.children[a].push((nb, bond));
                    self.parent[nb] = Some((a, bond));
                    self.plan(nb, bond);
                }
                1 => {
                    self.ring_open[nb].push((a, bond));
                    self.ring_close[a].push((nb, bond));
                }
                _ => {}
            }
        }
        self.state[a] = 2;
    }

    fn bond_symbol(&self, bond: usize) -> &'static str {
        let b = self.mol.bond(bond);
        let both_aromatic = self.mol.atom(b.a).aromatic && self.mol.atom(b.b).aromatic;
        match b.order {
            BondOrder::Single if both_aromatic => "-",
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        }
    }

    fn emit(&mut self, a: usize) {
        let atom = self.mol.atom(a);
        let mut parity = Parity::None;
        if atom.parity != Parity::None {
            let mut order = Vec::new();
            if let Some((p, _)) = self.parent[a] {
                order.push(NeighborSlot::Atom(p));
            }
            if atom.implicit_h > 0 {
                order.push(NeighborSlot::Hydrogen);
            }
            for &(x, _) in self.ring_close[a].iter().chain(self.ring_open[a].iter()) {
                order.push(NeighborSlot::Atom(x));
            }
            for &(x, _) in &self.children[a] {
                order.push(NeighborSlot::Atom(x));
            }
            parity = self.mol.parity_relative_to(a, &order);
        }
        write_atom(&mut self.out, self.mol, a, parity);

        let closes = core::mem::take(&mut self.ring_close[a]);
        let opens = core::mem::take(&mut self.ring_open[a]);
        let mut freed = Vec::new();
        for &(_, bond) in &closes {
            let d = self.bond_digit[bond];
            push_digit(&mut self.out, d);
            freed.push(d);
        }
        for &(_, bond) in &opens {
            let d = self.digits.take();
            self.bond_digit[bond] = d;
            let sym = self.bond_symbol(bond);
            self.out.push_str(sym);
            push_digit(&mut self.out, d);
        }
        for d in freed {
            self.digits.release(d);
        }

        let children = core::mem::take(&mut self.children[a]);
        let last = children.len().saturating_sub(1);
        for (k, &(child, bond)) in children.iter().enumerate() {
            let branch = k < last;
            if branch {
                self.out.push('(');
            }
            let sym = self.bond_symbol(bond);
            self.out.push_str(sym);
            self.emit(child);
            if branch {
                self.out.push(')');
            }
        }
    }
}

fn push_digit(out: &mut String, d: u32) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn write_atom(out: &mut String, mol: &Molecule, a: usize, parity: Parity) {
    let atom = mol.atom(a);
    if atom.element.is_attachment() {
        out.push('*');
        return;
    }
    let bare = parity == Parity::None
        && atom.formal_charge == 0
        && atom.element.is_organic_subset()
        && default_hydrogens(atom.element, atom.aromatic, mol.bond_valence_sum(a)) == Some(atom.implicit_h);
    let symbol = atom.element.symbol();
    if bare {
        if atom.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if atom.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    match parity {
        Parity::CounterClockwise => out.push('@'),
        Parity::Clockwise => out.push_str("@@"),
        Parity::None => {}
    }
    match atom.implicit_h {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -(c as i16));
        }
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn canon(s: &str) -> String {
        write_canonical_smiles(&parse_smiles(s).unwrap())
    }

    #[test]
    fn same_graph_same_string() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("C1CN1"), canon("N1CC1"));
        assert_eq!(canon("c1ccccc1C"), canon("Cc1ccccc1"));
        assert_eq!(canon("OC(=O)c1ccccc1"), canon("c1cc(C(O)=O)ccc1"));
    }

    #[test]
    fn different_graphs_differ() {
        assert_ne!(canon("CCO"), canon("COC"));
        assert_ne!(canon("CC=O"), canon("C=CO"));
        assert_ne!(canon("c1ccccc1"), canon("C1CCCCC1"));
    }

    #[test]
    fn neopentane_center_is_unique() {
        let m = parse_smiles("CC(C)(C)C").unwrap();
        let mut labels = initial_labels(&m);
        refine(&m, &mut labels);
        let center = labels[1];
        assert_eq!(labels.iter().filter(|&&l| l == center).count(), 1);
        assert_eq!(labels.iter().filter(|&&l| l != center).count(), 4);
        let methyl = labels[0];
        assert!([2, 3, 4].iter().all(|&i| labels[i] == methyl));
    }

    #[test]
    fn ethane_ties_until_broken() {
        let m = parse_smiles("CC").unwrap();
        let mut labels = initial_labels(&m);
        refine(&m, &mut labels);
        assert_eq!(labels[0], labels[1]);
        let ranks = canonical_ranks(&m);
        assert_ne!(ranks[0], ranks[1]);
    }

    #[test]
    fn charges_and_brackets_are_written() {
        assert_eq!(canon("[NH4+]"), "[NH4+]");
        assert_eq!(canon("C[O-]"), "C[O-]");
        assert_eq!(canon("c1cc[nH]c1"), canon("[nH]1cccc1"));
        assert_eq!(canon("[Fe+3]"), "[Fe+3]");
    }

    #[test]
    fn enantiomers_differ_and_rewrites_agree() {
        let a = canon("F[C@H](Cl)Br");
        let b = canon("[C@@H](F)(Cl)Br");
        let c = canon("F[C@@H](Cl)Br");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(canon("Br[C@@H](Cl)F"), canon("Cl[C@H](Br)F"));
    }

    #[test]
    fn output_reparses_to_same_canonical_form() {
        for s in [
            "CC(=O)Nc1ccc(O)cc1",
            "C1CC2CCC1C2",
            "c1ccc2c(c1)Cc1ccccc1-2",
            "O=C(O)C[C@@H](N)C(=O)O",
            "C1CCC2(CC1)CCCC2",
            "c1ccc(-c2ccccc2)cc1",
            "[O-][n+]1ccccc1",
            "C#CC=CC",
            "OC1C2CC3CC1CC(C2)C3",
        ] {
            let first = canon(s);
            assert_eq!(canon(&first), first, "{s}");
        }
    }
}
