//! SMILES reader.
//!
//! Supported subset: organic-subset and bracket atoms, formal charges,
//! branches, bond symbols `- = # :`, ring closures (`1`..`9`, `%nn`), dot
//! separated components, aromatic lowercase atoms and tetrahedral `@`/`@@`.
//! Isotope numbers, atom classes and the directional markers `/` `\` are
//! accepted and dropped. Explicit `[H]` atoms attached to a heavy atom are
//! folded into its hydrogen count. Anything else is reported as an error.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::element::Element;
use super::mol::{normalize_parity, Atom, BondOrder, Molecule, NeighborSlot, Parity};
use super::ChemError;

/// Hydrogens implied on an unbracketed atom, or `None` if no normal valence
/// accommodates `valence_sum`.
///
/// Aromatic B/C/N/P reserve one valence unit for the ring pi system (N and P
/// only in their trivalent state); aromatic O/S/Se do not. If the reserved
/// unit does not fit (exocyclic double bond, bridgehead nitrogen) the plain
/// rule is used.
pub fn default_hydrogens(element: Element, aromatic: bool, valence_sum: u32) -> Option<u8> {
    if element.is_attachment() {
        return (valence_sum <= 1).then_some(0);
    }
    let valences: &[u8] = match (aromatic, element) {
        (true, Element::N) | (true, Element::P) => &[3],
        _ => element.default_valences(),
    };
    if valences.is_empty() {
        return None;
    }
    let fit = |target: u32| valences.iter().map(|&v| v as u32).find(|&v| v >= target).map(|v| (v - target) as u8);
    if aromatic && matches!(element, Element::B | Element::C | Element::N | Element::P) {
        fit(valence_sum + 1).or_else(|| fit(valence_sum))
    } else {
        fit(valence_sum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    H,
    Atom(usize),
    Ring(u32),
}

#[derive(Clone, Debug)]
struct PAtom {
    element: Element,
    charge: i8,
    aromatic: bool,
    bracket: bool,
    hcount: u8,
    chiral: Parity,
    order: Vec<Slot>,
    pos: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BondSym {
    Order(BondOrder),
    /// `/` or `\`: a single bond whose direction is discarded
    Directional,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Order(o) => o,
            BondSym::Directional => BondOrder::Single,
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    allow_attachment: bool,
    atoms: Vec<PAtom>,
    bonds: Vec<(usize, usize, BondOrder)>,
}

/// Parses a SMILES string. Attachment markers `*` are rejected.
pub fn parse_smiles(text: &str) -> Result<Molecule, ChemError> {
    parse(text, false)
}

/// Parses a fragment SMILES, where `*` denotes an attachment point.
pub fn parse_fragment_smiles(text: &str) -> Result<Molecule, ChemError> {
    parse(text, true)
}

fn parse(text: &str, allow_attachment: bool) -> Result<Molecule, ChemError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(ChemError::Empty);
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        allow_attachment,
        atoms: Vec::new(),
        bonds: Vec::new(),
    };
    p.run()?;
    p.finish()
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn syntax(&self, msg: &'static str) -> ChemError {
        ChemError::Syntax { pos: self.pos, msg }
    }

    fn run(&mut self) -> Result<(), ChemError> {
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSym, usize)> = None;
        let mut branches: Vec<usize> = Vec::new();
        // ring number -> (opening atom, bond symbol, slot index in opener order)
        let mut rings: BTreeMap<u32, (usize, Option<BondSym>, usize)> = BTreeMap::new();

        while let Some(c) = self.peek() {
            match c {
                b'(' => {
                    let p = prev.ok_or_else(|| self.syntax("branch without preceding atom"))?;
                    if pending.is_some() {
                        return Err(self.syntax("bond symbol before branch"));
                    }
                    branches.push(p);
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return Err(self.syntax("dangling bond symbol"));
                    }
                    prev = Some(branches.pop().ok_or_else(|| self.syntax("unbalanced ')'"))?);
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() || !branches.is_empty() {
                        return Err(self.syntax("misplaced '.'"));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if pending.is_some() {
                        return Err(self.syntax("consecutive bond symbols"));
                    }
                    if prev.is_none() {
                        return Err(self.syntax("bond symbol without preceding atom"));
                    }
                    let sym = match c {
                        b'-' => BondSym::Order(BondOrder::Single),
                        b'=' => BondSym::Order(BondOrder::Double),
                        b'#' => BondSym::Order(BondOrder::Triple),
                        b':' => BondSym::Order(BondOrder::Aromatic),
                        b'$' => {
                            return Err(ChemError::Unsupported {
                                pos: self.pos,
                                feature: "quadruple bond",
                            })
                        }
                        _ => BondSym::Directional,
                    };
                    pending = Some((sym, self.pos));
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let atom = prev.ok_or_else(|| self.syntax("ring bond without preceding atom"))?;
                    let num = self.ring_number()?;
                    let sym = pending.take().map(|(s, _)| s);
                    if let Some((opener, osym, slot)) = rings.remove(&num) {
                        if opener == atom {
                            return Err(self.syntax("ring bond to itself"));
                        }
                        let order = match (osym, sym) {
                            (Some(a), Some(b)) if a.order() != b.order() => {
                                return Err(self.syntax("conflicting ring bond orders"))
                            }
                            (Some(a), _) => a.order(),
                            (None, Some(b)) => b.order(),
                            (None, None) => self.implicit_order(opener, atom),
                        };
                        if self.bonds.iter().any(|&(a, b, _)| (a == opener && b == atom) || (a == atom && b == opener)) {
                            return Err(self.syntax("duplicate bond"));
                        }
                        self.bonds.push((opener, atom, order));
                        self.atoms[opener].order[slot] = Slot::Atom(atom);
                        self.atoms[atom].order.push(Slot::Atom(opener));
                    } else {
                        let slot = self.atoms[atom].order.len();
                        self.atoms[atom].order.push(Slot::Ring(num));
                        rings.insert(num, (atom, sym, slot));
                    }
                }
                _ => {
                    let idx = self.atom()?;
                    if let Some(p) = prev {
                        let order = match pending.take() {
                            Some((s, _)) => s.order(),
                            None => self.implicit_order(p, idx),
                        };
                        self.bonds.push((p, idx, order));
                        self.atoms[p].order.push(Slot::Atom(idx));
                        self.atoms[idx].order.insert(0, Slot::Atom(p));
                    } else if let Some((_, pos)) = pending {
                        return Err(ChemError::Syntax {
                            pos,
                            msg: "bond symbol without preceding atom",
                        });
                    }
                    prev = Some(idx);
                }
            }
        }
        if let Some((_, pos)) = pending {
            return Err(ChemError::Syntax {
                pos,
                msg: "dangling bond symbol",
            });
        }
        if !branches.is_empty() {
            return Err(self.syntax("unclosed branch"));
        }
        if let Some((&num, _)) = rings.iter().next() {
            return Err(ChemError::UnclosedRing { ring: num });
        }
        if self.atoms.is_empty() {
            return Err(ChemError::Empty);
        }
        Ok(())
    }

    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn ring_number(&mut self) -> Result<u32, ChemError> {
        let c = self.peek().unwrap();
        if c == b'%' {
            self.pos += 1;
            let digits = self.text.get(self.pos..self.pos + 2).unwrap_or(&[]);
            if digits.len() != 2 || !digits.iter().all(u8::is_ascii_digit) {
                return Err(self.syntax("'%' must be followed by two digits"));
            }
            self.pos += 2;
            Ok(((digits[0] - b'0') * 10 + (digits[1] - b'0')) as u32)
        } else {
            self.pos += 1;
            Ok((c - b'0') as u32)
        }
    }

    fn push_atom(&mut self, atom: PAtom) -> usize {
        self.atoms.push(atom);
        self.atoms.len() - 1
    }

    fn atom(&mut self) -> Result<usize, ChemError> {
        let start = self.pos;
        let c = self.peek().unwrap();
        let (element, aromatic) = match c {
            b'[' => return self.bracket_atom(),
            b'*' => {
                if !self.allow_attachment {
                    return Err(ChemError::Unsupported {
                        pos: start,
                        feature: "wildcard atom outside fragment context",
                    });
                }
                self.pos += 1;
                (Element::ATTACHMENT, false)
            }
            b'B' if self.text.get(self.pos + 1) == Some(&b'r') => {
                self.pos += 2;
                (Element::BR, false)
            }
            b'C' if self.text.get(self.pos + 1) == Some(&b'l') => {
                self.pos += 2;
                (Element::CL, false)
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                self.pos += 1;
                let sym = [c];
                (Element::from_symbol(core::str::from_utf8(&sym).unwrap()).unwrap(), false)
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                self.pos += 1;
                let sym = [c.to_ascii_uppercase()];
                (Element::from_symbol(core::str::from_utf8(&sym).unwrap()).unwrap(), true)
            }
            _ => return Err(self.syntax("unexpected character")),
        };
        Ok(self.push_atom(PAtom {
            element,
            charge: 0,
            aromatic,
            bracket: false,
            hcount: 0,
            chiral: Parity::None,
            order: Vec::new(),
            pos: start,
        }))
    }

    fn number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        core::str::from_utf8(&self.text[start..self.pos]).ok()?.parse().ok()
    }

    fn bracket_atom(&mut self) -> Result<usize, ChemError> {
        let start = self.pos;
        self.pos += 1;
        // isotope: parsed and dropped
        let _ = self.number();
        let (element, aromatic) = self.bracket_symbol()?;

        let mut chiral = Parity::None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            chiral = Parity::CounterClockwise;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chiral = Parity::Clockwise;
            } else if [&b"TH"[..], b"AL", b"SP", b"TB", b"OH"]
                .iter()
                .any(|class| self.text[self.pos..].starts_with(class))
            {
                return Err(ChemError::Unsupported {
                    pos: self.pos,
                    feature: "non-tetrahedral chirality class",
                });
            }
        }

        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hcount = match self.number() {
                Some(n) if n <= 9 => n as u8,
                Some(_) => return Err(self.syntax("hydrogen count too large")),
                None => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
            if !(-15..=15).contains(&charge) {
                return Err(self.syntax("charge out of range"));
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.number().is_none() {
                return Err(self.syntax("atom class requires digits"));
            }
        }
        if self.peek() != Some(b']') {
            return Err(self.syntax("expected ']'"));
        }
        self.pos += 1;

        if element.is_attachment() && !self.allow_attachment {
            return Err(ChemError::Unsupported {
                pos: start,
                feature: "wildcard atom outside fragment context",
            });
        }
        if element == Element::H && hcount > 0 {
            return Err(ChemError::Unsupported {
                pos: start,
                feature: "hydrogen atom carrying hydrogens",
            });
        }
        let mut order = Vec::new();
        if hcount > 0 {
            order.push(Slot::H);
        }
        Ok(self.push_atom(PAtom {
            element,
            charge: charge as i8,
            aromatic,
            bracket: true,
            hcount,
            chiral,
            order,
            pos: start,
        }))
    }

    fn bracket_symbol(&mut self) -> Result<(Element, bool), ChemError> {
        let rest = &self.text[self.pos..];
        if rest.first() == Some(&b'*') {
            self.pos += 1;
            return Ok((Element::ATTACHMENT, false));
        }
        for (sym, e) in [("se", Element::SE), ("as", Element::from_atomic_number(33).unwrap()), ("te", Element::from_atomic_number(52).unwrap())] {
            if rest.starts_with(sym.as_bytes()) {
                self.pos += 2;
                return Ok((e, true));
            }
        }
        match rest.first() {
            Some(&c @ (b'b' | b'c' | b'n' | b'o' | b'p' | b's')) => {
                self.pos += 1;
                let sym = [c.to_ascii_uppercase()];
                return Ok((Element::from_symbol(core::str::from_utf8(&sym).unwrap()).unwrap(), true));
            }
            Some(c) if c.is_ascii_uppercase() => {}
            _ => return Err(self.syntax("expected element symbol")),
        }
        if rest.len() >= 2 && rest[1].is_ascii_lowercase() {
            if let Some(e) = core::str::from_utf8(&rest[..2]).ok().and_then(Element::from_symbol) {
                self.pos += 2;
                return Ok((e, false));
            }
        }
        let e = core::str::from_utf8(&rest[..1])
            .ok()
            .and_then(Element::from_symbol)
            .ok_or(ChemError::UnknownElement { pos: self.pos })?;
        self.pos += 1;
        Ok((e, false))
    }

    fn finish(mut self) -> Result<Molecule, ChemError> {
        let n = self.atoms.len();
        let mut adjacency: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
        for &(a, b, o) in &self.bonds {
            adjacency[a].push((b, o));
            adjacency[b].push((a, o));
        }

        // fold explicit hydrogens into their heavy neighbour
        let mut removed = vec![false; n];
        let mut extra_h = vec![0u8; n];
        for h in 0..n {
            let atom = &self.atoms[h];
            if atom.element != Element::H || atom.charge != 0 || adjacency[h].len() != 1 {
                continue;
            }
            let (nb, order) = adjacency[h][0];
            if order != BondOrder::Single || self.atoms[nb].element == Element::H || removed[nb] {
                continue;
            }
            removed[h] = true;
            extra_h[nb] += 1;
            for slot in self.atoms[nb].order.iter_mut() {
                if *slot == Slot::Atom(h) {
                    *slot = Slot::H;
                }
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            if !removed[i] {
                index[i] = next;
                next += 1;
            }
        }

        let mut atoms = Vec::with_capacity(next);
        for (i, pa) in self.atoms.iter().enumerate() {
            if removed[i] {
                continue;
            }
            let sum: u32 = adjacency[i].iter().map(|&(_, o)| o.valence() as u32).sum();
            let implicit_h = if pa.bracket {
                let total = pa.hcount as u32 + extra_h[i] as u32;
                if let Some(&max) = pa.element.default_valences().iter().max() {
                    if sum + total > max as u32 + pa.charge.unsigned_abs() as u32 {
                        return Err(ChemError::Valence { atom: i, pos: pa.pos });
                    }
                }
                total as u8
            } else {
                let heavy_sum = sum;
                default_hydrogens(pa.element, pa.aromatic, heavy_sum)
                    .ok_or(ChemError::Valence { atom: i, pos: pa.pos })?
                    + extra_h[i]
            };
            let mut atom = Atom::new(pa.element);
            atom.formal_charge = pa.charge;
            atom.aromatic = pa.aromatic;
            atom.implicit_h = implicit_h;
            if pa.chiral != Parity::None {
                let slots = pa.order.len();
                let h_slots = pa.order.iter().filter(|s| **s == Slot::H).count();
                if slots >= 3 && h_slots <= 1 && implicit_h <= 1 {
                    let order: Vec<NeighborSlot> = pa
                        .order
                        .iter()
                        .map(|s| match *s {
                            Slot::H => NeighborSlot::Hydrogen,
                            Slot::Atom(x) => NeighborSlot::Atom(index[x]),
                            Slot::Ring(_) => unreachable!("rings are closed"),
                        })
                        .collect();
                    atom.parity = normalize_parity(pa.chiral, &order);
                }
            }
            atoms.push(atom);
        }
        let bonds: Vec<(usize, usize, BondOrder)> = self
            .bonds
            .drain(..)
            .filter(|&(a, b, _)| !removed[a] && !removed[b])
            .map(|(a, b, o)| (index[a], index[b], o))
            .collect();
        let mut mol = Molecule::new(atoms, bonds)?;

        for i in 0..mol.atom_count() {
            if mol.atom(i).aromatic && !mol.atom(i).in_ring {
                let pos = self.atoms.iter().enumerate().find(|(k, _)| index[*k] == i).map_or(0, |(_, a)| a.pos);
                return Err(ChemError::NonRingAromatic { atom: i, pos });
            }
        }
        for b in 0..mol.bonds().len() {
            if mol.bond(b).order == BondOrder::Aromatic && !mol.bond(b).in_ring {
                mol.set_bond_order(b, BondOrder::Single);
            }
        }
        Ok(mol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(s: &str) -> Vec<u8> {
        parse_smiles(s).unwrap().atoms().iter().map(|a| a.implicit_h).collect()
    }

    #[test]
    fn ethanol_hydrogens() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.atom_count(), 3);
        assert_eq!(hs("CCO"), vec![3, 2, 1]);
    }

    #[test]
    fn benzene_is_aromatic_ring() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic && a.in_ring && a.implicit_h == 1));
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic && b.in_ring));
    }

    #[test]
    fn unclosed_ring_is_an_error() {
        assert_eq!(parse_smiles("C1CC"), Err(ChemError::UnclosedRing { ring: 1 }));
    }

    #[test]
    fn hydrogen_counts_for_common_groups() {
        assert_eq!(hs("CC(=O)O"), vec![3, 0, 0, 1]);
        assert_eq!(hs("C#N"), vec![1, 0]);
        assert_eq!(hs("c1ccncc1"), vec![1, 1, 1, 0, 1, 1]);
        assert_eq!(hs("c1cc[nH]c1"), vec![1, 1, 1, 1, 1]);
        assert_eq!(hs("c1ccsc1"), vec![1, 1, 1, 0, 1]);
        assert_eq!(hs("c1ccc2ccccc2c1"), vec![1, 1, 1, 0, 1, 1, 1, 1, 0, 1]);
        assert_eq!(hs("O=c1cccc[nH]1"), vec![0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(hs("CS(=O)(=O)C"), vec![3, 0, 0, 0, 3]);
        assert_eq!(hs("[NH4+]"), vec![4]);
        assert_eq!(hs("C[N+](C)(C)C"), vec![3, 0, 3, 3, 3]);
        assert_eq!(hs("Cn1ccnc1"), vec![3, 0, 1, 1, 0, 1]);
    }

    #[test]
    fn isotopes_and_explicit_hydrogens_are_folded() {
        // a bracket atom keeps its written hydrogen count; only the mass is lost
        let a = parse_smiles("[13C]CO").unwrap();
        assert_eq!(a, parse_smiles("[C]CO").unwrap());
        assert_eq!(parse_smiles("[13CH3]CO").unwrap(), parse_smiles("CCO").unwrap());
        let h = parse_smiles("[H]OCC").unwrap();
        assert_eq!(h.atom_count(), 3);
        assert_eq!(h.atom(0).implicit_h, 1);
        let d = parse_smiles("[2H]C([2H])([2H])C").unwrap();
        assert_eq!(d.atom_count(), 2);
        assert_eq!(d.atom(0).implicit_h, 3);
    }

    #[test]
    fn non_ring_aromatic_bond_becomes_single() {
        let m = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let single: Vec<_> = m.bonds().iter().filter(|b| b.order == BondOrder::Single).collect();
        assert_eq!(single.len(), 1);
        assert!(!single[0].in_ring);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(parse_smiles(""), Err(ChemError::Empty)));
        assert!(matches!(parse_smiles("C(C"), Err(ChemError::Syntax { .. })));
        assert!(matches!(parse_smiles("C)C"), Err(ChemError::Syntax { .. })));
        assert!(matches!(parse_smiles("=CC"), Err(ChemError::Syntax { .. })));
        assert!(matches!(parse_smiles("CC="), Err(ChemError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_smiles("C(C)(C)(C)(C)C"), Err(ChemError::Valence { .. })));
        assert!(matches!(parse_smiles("[CH5]"), Err(ChemError::Valence { .. })));
        assert!(matches!(parse_smiles("C*"), Err(ChemError::Unsupported { .. })));
        assert!(matches!(parse_smiles("[Xx]"), Err(ChemError::UnknownElement { .. })));
        assert!(matches!(parse_smiles("cC"), Err(ChemError::NonRingAromatic { .. })));
        assert!(parse_smiles("C1CC=1C").is_ok());
        assert!(matches!(parse_smiles("C=1CC-1"), Err(ChemError::Syntax { .. })));
        assert!(matches!(parse_smiles("[C@TH1](F)(Cl)Br"), Err(ChemError::Unsupported { .. })));
        assert!(matches!(parse_smiles("CC$C"), Err(ChemError::Unsupported { .. })));
    }

    #[test]
    fn fragments_allow_attachment() {
        let m = parse_fragment_smiles("*c1ccccc1").unwrap();
        assert_eq!(m.attachment_count(), 1);
        assert_eq!(m.heavy_atom_count(), 6);
        assert_eq!(m.atom(1).implicit_h, 0);
    }

    #[test]
    fn percent_ring_numbers_and_charges() {
        let m = parse_smiles("C%12CCC%12").unwrap();
        assert!(m.bonds().iter().all(|b| b.in_ring));
        let m = parse_smiles("[O-]C(=O)C.[Na+]").unwrap();
        assert_eq!(m.atom(0).formal_charge, -1);
        assert_eq!(m.atom(4).formal_charge, 1);
        let m = parse_smiles("[Fe+++]").unwrap();
        assert_eq!(m.atom(0).formal_charge, 3);
        let m = parse_smiles("[Cu-2]").unwrap();
        assert_eq!(m.atom(0).formal_charge, -2);
    }

    #[test]
    fn chirality_is_normalized() {
        // same configuration written in two orders
        let a = parse_smiles("F[C@H](Cl)Br").unwrap();
        let b = parse_smiles("[C@@H](F)(Cl)Br").unwrap();
        assert_ne!(a.atom(1).parity, Parity::None);
        assert_ne!(b.atom(0).parity, Parity::None);
        // chirality dropped on atoms with two hydrogens
        let c = parse_smiles("F[C@H2]Cl").unwrap();
        assert_eq!(c.atom(1).parity, Parity::None);
    }
}
