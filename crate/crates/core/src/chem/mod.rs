//! Molecular graphs: SMILES input, ring perception, canonical output and
//! identity digests.

mod canon;
mod element;
mod mol;
mod smiles;

use alloc::string::String;
use core::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use canon::{canonical_ranks, canonicalize, write_canonical_smiles, write_smiles_with_ranks, Canonical};
pub use element::Element;
pub use mol::{Atom, Bond, BondOrder, Molecule, NeighborSlot, Parity};
pub use smiles::{default_hydrogens, parse_fragment_smiles, parse_smiles};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChemError {
    #[error("empty SMILES")]
    Empty,
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: &'static str },
    #[error("unclosed ring bond {ring}")]
    UnclosedRing { ring: u32 },
    #[error("valence violation on atom {atom} (position {pos})")]
    Valence { atom: usize, pos: usize },
    #[error("unsupported feature at position {pos}: {feature}")]
    Unsupported { pos: usize, feature: &'static str },
    #[error("unknown element at position {pos}")]
    UnknownElement { pos: usize },
    #[error("aromatic atom {atom} outside a ring (position {pos})")]
    NonRingAromatic { atom: usize, pos: usize },
    #[error("invalid bond between atoms {a} and {b}")]
    InvalidBond { a: usize, b: usize },
}

impl ChemError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ChemError::Empty => "empty",
            ChemError::Syntax { .. } => "syntax",
            ChemError::UnclosedRing { .. } => "unclosed_ring",
            ChemError::Valence { .. } => "valence",
            ChemError::Unsupported { .. } => "unsupported",
            ChemError::UnknownElement { .. } => "unknown_element",
            ChemError::NonRingAromatic { .. } => "non_ring_aromatic",
            ChemError::InvalidBond { .. } => "invalid_bond",
        }
    }
}

/// SHA-256 digest of the canonical SMILES.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraphKey(pub [u8; 32]);

impl GraphKey {
    pub fn of_smiles(canonical_smiles: &str) -> GraphKey {
        let digest = Sha256::digest(canonical_smiles.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        GraphKey(out)
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.0 {
            let _ = fmt::Write::write_fmt(&mut s, format_args!("{b:02x}"));
        }
        s
    }
}

impl fmt::Debug for GraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphKey({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for GraphKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl GraphKey {
    pub fn from_hex(hex: &str) -> Option<GraphKey> {
        if hex.len() != 64 || !hex.is_ascii() {
            return None;
        }
        let mut out = [0u8; 32];
        for (k, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).ok()?;
        }
        Some(GraphKey(out))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for GraphKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for GraphKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        GraphKey::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

pub fn graph_key(mol: &Molecule) -> GraphKey {
    GraphKey::of_smiles(&write_canonical_smiles(mol))
}
