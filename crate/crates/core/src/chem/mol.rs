//! Molecular graph with implicit hydrogens, ring flags and tetrahedral parity.

use alloc::vec;
use alloc::vec::Vec;

use super::element::Element;
use super::ChemError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Small integer code used in invariants and hashes.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to the valence sum; aromatic bonds count as one, the
    /// extra pi electron is handled by the aromatic hydrogen rule.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// Tetrahedral parity. The reference neighbour order is: implicit hydrogen
/// first (if any), then neighbouring atoms by ascending atom index. Looking
/// from the first reference neighbour, `Clockwise` means the remaining ones
/// turn clockwise (SMILES `@@`), `CounterClockwise` anticlockwise (`@`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Parity {
    #[default]
    None,
    Clockwise,
    CounterClockwise,
}

impl Parity {
    pub fn flipped(self) -> Parity {
        match self {
            Parity::None => Parity::None,
            Parity::Clockwise => Parity::CounterClockwise,
            Parity::CounterClockwise => Parity::Clockwise,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Parity::None => 0,
            Parity::Clockwise => 1,
            Parity::CounterClockwise => 2,
        }
    }
}

/// One entry of a neighbour ordering used to express parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborSlot {
    Hydrogen,
    Atom(usize),
}

impl NeighborSlot {
    fn sort_key(self) -> usize {
        match self {
            NeighborSlot::Hydrogen => 0,
            NeighborSlot::Atom(i) => i + 1,
        }
    }
}

/// Re-expresses `tag`, given relative to `order`, against the reference order.
pub(crate) fn normalize_parity(tag: Parity, order: &[NeighborSlot]) -> Parity {
    if tag == Parity::None {
        return tag;
    }
    let mut inversions = 0usize;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i].sort_key() > order[j].sort_key() {
                inversions += 1;
            }
        }
    }
    if inversions.is_multiple_of(2) {
        tag
    } else {
        tag.flipped()
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    pub aromatic: bool,
    pub implicit_h: u8,
    pub parity: Parity,
    pub in_ring: bool,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            formal_charge: 0,
            aromatic: false,
            implicit_h: 0,
            parity: Parity::None,
            in_ring: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub in_ring: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Immutable molecular graph. Hydrogens are implicit counts on heavy atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// (neighbour atom, bond index) per atom
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    /// Builds a molecule, validates the bond list and perceives rings.
    /// `in_ring` flags on the inputs are ignored and recomputed.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<(usize, usize, BondOrder)>) -> Result<Molecule, ChemError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut out = Vec::with_capacity(bonds.len());
        for (idx, &(a, b, order)) in bonds.iter().enumerate() {
            if a >= n || b >= n || a == b {
                return Err(ChemError::InvalidBond { a, b });
            }
            if adjacency[a].iter().any(|&(x, _)| x == b) {
                return Err(ChemError::InvalidBond { a, b });
            }
            adjacency[a].push((b, idx));
            adjacency[b].push((a, idx));
            out.push(Bond {
                a,
                b,
                order,
                in_ring: false,
            });
        }
        let mut mol = Molecule {
            atoms,
            bonds: out,
            adjacency,
        };
        mol.perceive_rings();
        Ok(mol)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// (neighbour, bond index) pairs of atom `i` in insertion order.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(x, _)| x == b).map(|&(_, bi)| bi)
    }

    /// Sum of bond valence contributions around atom `i`.
    pub fn bond_valence_sum(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence() as u32)
            .sum()
    }

    pub fn has_aromatic_bond(&self, i: usize) -> bool {
        self.adjacency[i]
            .iter()
            .any(|&(_, b)| self.bonds[b].order == BondOrder::Aromatic)
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element.is_heavy()).count()
    }

    pub fn attachment_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element.is_attachment()).count()
    }

    pub fn total_hydrogens(&self) -> usize {
        self.atoms.iter().map(|a| a.implicit_h as usize).sum()
    }

    /// Connected components as sorted atom index lists, ordered by lowest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            seen[start] = true;
            let mut comp = Vec::new();
            while let Some(a) = stack.pop() {
                comp.push(a);
                for &(nb, _) in &self.adjacency[a] {
                    if !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.len() <= 1 || self.components().len() == 1
    }

    /// Parity of atom `i` expressed against an arbitrary neighbour order.
    pub fn parity_relative_to(&self, i: usize, order: &[NeighborSlot]) -> Parity {
        // the stored parity is relative to the reference order; converting
        // back is the same permutation-sign computation
        normalize_parity(self.atoms[i].parity, order)
    }

    /// Reference neighbour order of atom `i` under a relabelling `map`
    /// (old index -> new slot).
    fn mapped_reference_order(&self, i: usize, map: &dyn Fn(usize) -> NeighborSlot) -> Vec<NeighborSlot> {
        let mut nbrs: Vec<usize> = self.adjacency[i].iter().map(|&(x, _)| x).collect();
        nbrs.sort_unstable();
        let mut order = Vec::with_capacity(nbrs.len() + 1);
        if self.atoms[i].implicit_h > 0 {
            order.push(NeighborSlot::Hydrogen);
        }
        order.extend(nbrs.into_iter().map(map));
        order
    }

    /// Returns the same molecule with atom `old` moved to position `perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![Atom::new(Element::C); self.atoms.len()];
        for (old, atom) in self.atoms.iter().enumerate() {
            let mut atom = atom.clone();
            if atom.parity != Parity::None {
                let order = self.mapped_reference_order(old, &|x| NeighborSlot::Atom(perm[x]));
                atom.parity = normalize_parity(atom.parity, &order);
            }
            atoms[perm[old]] = atom;
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| (perm[b.a], perm[b.b], b.order))
            .collect();
        Molecule::new(atoms, bonds).expect("permutation preserves validity")
    }

    /// Induced subgraph on `keep` (any order; output keeps that order).
    pub fn subgraph(&self, keep: &[usize]) -> Molecule {
        self.fragment(keep, None)
    }

    /// Induced subgraph on `keep` plus an attachment atom `*` bonded to
    /// `attach.0` in place of its former neighbour `attach.1`.
    pub fn fragment(&self, keep: &[usize], attach: Option<(usize, usize)>) -> Molecule {
        let mut index = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let star = keep.len();
        let mut atoms = Vec::with_capacity(keep.len() + 1);
        for &old in keep {
            let mut atom = self.atoms[old].clone();
            if atom.parity != Parity::None {
                let map = |x: usize| -> NeighborSlot {
                    if index[x] != usize::MAX {
                        NeighborSlot::Atom(index[x])
                    } else {
                        NeighborSlot::Atom(star)
                    }
                };
                let complete = self.adjacency[old].iter().all(|&(x, _)| {
                    index[x] != usize::MAX || matches!(attach, Some((a, r)) if a == old && r == x)
                });
                if complete {
                    let order = self.mapped_reference_order(old, &map);
                    atom.parity = normalize_parity(atom.parity, &order);
                } else {
                    atom.parity = Parity::None;
                }
            }
            atoms.push(atom);
        }
        let mut bonds: Vec<(usize, usize, BondOrder)> = self
            .bonds
            .iter()
            .filter(|b| index[b.a] != usize::MAX && index[b.b] != usize::MAX)
            .map(|b| (index[b.a], index[b.b], b.order))
            .collect();
        if let Some((at, _)) = attach {
            atoms.push(Atom::new(Element::ATTACHMENT));
            bonds.push((index[at], star, BondOrder::Single));
        }
        Molecule::new(atoms, bonds).expect("subgraph of a valid molecule")
    }

    /// Marks bridges as acyclic; every other bond lies on a cycle.
    fn perceive_rings(&mut self) {
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut bridge = vec![false; self.bonds.len()];
        let mut timer = 0usize;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, bond used to enter, next adjacency position)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (v, via, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[v].len() {
                    let (w, b) = self.adjacency[v][*pos];
                    *pos += 1;
                    if b == via {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, b, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(parent, _, _)) = stack.last() {
                        low[parent] = low[parent].min(low[v]);
                        if low[v] > disc[parent] {
                            bridge[via] = true;
                        }
                    }
                }
            }
        }
        for atom in &mut self.atoms {
            atom.in_ring = false;
        }
        for (i, bond) in self.bonds.iter_mut().enumerate() {
            bond.in_ring = !bridge[i];
            if bond.in_ring {
                self.atoms[bond.a].in_ring = true;
                self.atoms[bond.b].in_ring = true;
            }
        }
    }

    pub(crate) fn set_bond_order(&mut self, bond: usize, order: BondOrder) {
        self.bonds[bond].order = order;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carbon_chain(n: usize, ring: bool) -> Molecule {
        let atoms = vec![Atom::new(Element::C); n];
        let mut bonds: Vec<_> = (1..n).map(|i| (i - 1, i, BondOrder::Single)).collect();
        if ring {
            bonds.push((n - 1, 0, BondOrder::Single));
        }
        Molecule::new(atoms, bonds).unwrap()
    }

    #[test]
    fn rings_are_detected_as_non_bridges() {
        let chain = carbon_chain(5, false);
        assert!(chain.bonds().iter().all(|b| !b.in_ring));
        let ring = carbon_chain(5, true);
        assert!(ring.bonds().iter().all(|b| b.in_ring));
        assert!(ring.atoms().iter().all(|a| a.in_ring));
    }

    #[test]
    fn duplicate_and_self_bonds_are_rejected() {
        let atoms = vec![Atom::new(Element::C); 2];
        assert!(Molecule::new(atoms.clone(), vec![(0, 0, BondOrder::Single)]).is_err());
        assert!(Molecule::new(
            atoms.clone(),
            vec![(0, 1, BondOrder::Single), (1, 0, BondOrder::Double)]
        )
        .is_err());
        assert!(Molecule::new(atoms, vec![(0, 2, BondOrder::Single)]).is_err());
    }

    #[test]
    fn parity_normalization_counts_inversions() {
        use NeighborSlot::*;
        let p = Parity::CounterClockwise;
        assert_eq!(normalize_parity(p, &[Hydrogen, Atom(1), Atom(2), Atom(3)]), p);
        assert_eq!(normalize_parity(p, &[Atom(1), Hydrogen, Atom(2), Atom(3)]), p.flipped());
        assert_eq!(normalize_parity(p, &[Atom(3), Atom(1), Atom(2)]), p);
    }

    #[test]
    fn components_are_split() {
        let atoms = vec![Atom::new(Element::C); 4];
        let mol = Molecule::new(atoms, vec![(0, 1, BondOrder::Single), (2, 3, BondOrder::Single)]).unwrap();
        assert_eq!(mol.components(), vec![vec![0, 1], vec![2, 3]]);
        assert!(!mol.is_connected());
    }
}
