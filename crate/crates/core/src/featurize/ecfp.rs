//! Extended-connectivity fingerprints.
//!
//! Identifier hash: invariant tuples are folded as 32-bit words with the
//! `hash_combine` step `seed ^= v + 0x9e3779b9 + (seed << 6) + (seed >> 2)`
//! and finalised with the MurmurHash3 `fmix32` mixer. Everything is defined
//! on `u32` with wrapping arithmetic so results do not depend on platform.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::chem::Molecule;

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_NBITS: usize = 2048;

fn combine(seed: u32, value: u32) -> u32 {
    seed ^ value
        .wrapping_add(0x9e37_79b9)
        .wrapping_add(seed << 6)
        .wrapping_add(seed >> 2)
}

fn fmix32(mut h: u32) -> u32 {
    h ^= h >> 16;
    h = h.wrapping_mul(0x85eb_ca6b);
    h ^= h >> 13;
    h = h.wrapping_mul(0xc2b2_ae35);
    h ^= h >> 16;
    h
}

pub fn hash_words(words: &[u32]) -> u32 {
    fmix32(words.iter().fold(0u32, |s, &w| combine(s, w)))
}

fn initial_identifier(mol: &Molecule, i: usize, use_chirality: bool) -> u32 {
    let a = mol.atom(i);
    let mut words = vec![
        a.element.atomic_number() as u32,
        a.formal_charge as i32 as u32,
        mol.degree(i) as u32,
        a.implicit_h as u32,
        a.aromatic as u32,
        a.in_ring as u32,
    ];
    if use_chirality {
        words.push(a.parity.code() as u32);
    }
    hash_words(&words)
}

/// Bitset over atom indices.
type AtomSet = Vec<u64>;

/// All surviving substructure identifiers up to `radius`, before folding.
pub fn ecfp_identifiers(mol: &Molecule, radius: usize, use_chirality: bool) -> BTreeSet<u32> {
    let n = mol.atom_count();
    let words = n.div_ceil(64).max(1);
    let mut ids: Vec<u32> = (0..n).map(|i| initial_identifier(mol, i, use_chirality)).collect();
    let mut envs: Vec<AtomSet> = (0..n)
        .map(|i| {
            let mut s = vec![0u64; words];
            s[i / 64] |= 1 << (i % 64);
            s
        })
        .collect();

    let mut out: BTreeSet<u32> = BTreeSet::new();
    let mut seen: BTreeSet<AtomSet> = BTreeSet::new();
    // iteration 0: every atom is its own substructure
    for i in 0..n {
        out.insert(ids[i]);
        seen.insert(envs[i].clone());
    }

    for iteration in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_envs = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(u32, u32)> = mol
                .neighbors(i)
                .iter()
                .map(|&(x, b)| (mol.bond(b).order.code() as u32, ids[x]))
                .collect();
            nbrs.sort_unstable();
            let mut w = Vec::with_capacity(2 + 2 * nbrs.len());
            w.push(iteration as u32);
            w.push(ids[i]);
            for (bond, id) in nbrs {
                w.push(bond);
                w.push(id);
            }
            next_ids.push(hash_words(&w));
            let mut env = envs[i].clone();
            for &(x, _) in mol.neighbors(i) {
                for (dst, src) in env.iter_mut().zip(&envs[x]) {
                    *dst |= *src;
                }
            }
            next_envs.push(env);
        }
        // same-iteration duplicates keep the lowest identifier
        let mut fresh: BTreeMap<&AtomSet, u32> = BTreeMap::new();
        for i in 0..n {
            if seen.contains(&next_envs[i]) {
                continue;
            }
            let e = fresh.entry(&next_envs[i]).or_insert(next_ids[i]);
            *e = (*e).min(next_ids[i]);
        }
        let accepted: Vec<(AtomSet, u32)> = fresh.into_iter().map(|(k, v)| (k.clone(), v)).collect();
        for (env, id) in accepted {
            out.insert(id);
            seen.insert(env);
        }
        ids = next_ids;
        envs = next_envs;
    }
    out
}

/// Folded binary fingerprint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fingerprint {
    bits: Vec<u64>,
    nbits: usize,
    radius: usize,
}

pub fn ecfp(mol: &Molecule, radius: usize, nbits: usize, use_chirality: bool) -> Fingerprint {
    assert!(nbits >= 64 && nbits.is_power_of_two(), "nbits must be a power of two >= 64");
    let mut fp = Fingerprint::empty(nbits, radius);
    for id in ecfp_identifiers(mol, radius, use_chirality) {
        fp.set((id as usize) % nbits);
    }
    fp
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: usize) -> Fingerprint {
        Fingerprint {
            bits: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        self.bits[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.bits[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    pub fn tanimoto(&self, other: &Fingerprint) -> f64 {
        assert_eq!(self.nbits, other.nbits);
        let (mut inter, mut union) = (0u32, 0u32);
        for (a, b) in self.bits.iter().zip(&other.bits) {
            inter += (a & b).count_ones();
            union += (a | b).count_ones();
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn tanimoto_distance(&self, other: &Fingerprint) -> f64 {
        1.0 - self.tanimoto(other)
    }

    /// 0/1 dense encoding.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.nbits).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    /// Hex string; byte `k` covers bits `8k..8k+8` with bit `8k` as the
    /// least significant bit of that byte.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.nbits / 4);
        for byte in 0..self.nbits / 8 {
            let v = (self.bits[byte / 8] >> ((byte % 8) * 8)) as u8;
            let _ = write!(s, "{v:02x}");
        }
        s
    }

    pub fn from_hex(hex: &str, radius: usize) -> Option<Fingerprint> {
        if !hex.len().is_multiple_of(2) {
            return None;
        }
        let nbits = hex.len() * 4;
        if nbits < 64 || !nbits.is_power_of_two() {
            return None;
        }
        let mut fp = Fingerprint::empty(nbits, radius);
        for (byte, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let v = u8::from_str_radix(core::str::from_utf8(chunk).ok()?, 16).ok()?;
            fp.bits[byte / 8] |= (v as u64) << ((byte % 8) * 8);
        }
        Some(fp)
    }
}
