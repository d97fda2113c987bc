//! Structure standardisation, duplicate unification and activity labels.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::chem::{parse_smiles, write_canonical_smiles, Molecule};

/// Duplicates are unified when max/min of their raw activities is at most this.
pub const DUPLICATE_RATIO_LIMIT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ActivityUnit {
    #[cfg_attr(feature = "serde", serde(rename = "nM"))]
    NanoMolar,
    #[cfg_attr(feature = "serde", serde(rename = "uM"))]
    MicroMolar,
}

impl ActivityUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivityUnit::NanoMolar => "nM",
            ActivityUnit::MicroMolar => "uM",
        }
    }
}

impl fmt::Display for ActivityUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivityUnit {
    type Err = CurationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "nM" | "nm" | "NM" => Ok(ActivityUnit::NanoMolar),
            "uM" | "um" | "UM" | "\u{b5}M" | "\u{3bc}M" => Ok(ActivityUnit::MicroMolar),
            other => Err(CurationError::UnknownUnit(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CurationError {
    #[error("activity value must be positive and finite, got {0}")]
    NonPositiveActivity(f64),
    #[error("unknown activity unit {0:?} (expected nM or uM)")]
    UnknownUnit(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub id: String,
    pub smiles: String,
    pub activity_value: f64,
    pub activity_unit: ActivityUnit,
}

#[derive(Clone, Debug)]
pub struct CompoundRecord {
    pub id: String,
    pub canonical_smiles: String,
    pub mol: Molecule,
    /// Raw activity in `unit` (geometric mean for unified duplicates).
    pub activity_value: f64,
    pub unit: ActivityUnit,
    /// Negative decadic logarithm of `activity_value`.
    pub a: f64,
}

/// `-log10(value)` in the value's native unit; no unit conversion.
pub fn activity_label(value: f64, _unit: ActivityUnit) -> Result<f64, CurationError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(CurationError::NonPositiveActivity(value));
    }
    Ok(-libm::log10(value))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CurationAction {
    Kept,
    Desalted,
    Rejected,
    Merged,
    RemovedDuplicateGroup,
}

impl CurationAction {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurationAction::Kept => "kept",
            CurationAction::Desalted => "desalted",
            CurationAction::Rejected => "rejected",
            CurationAction::Merged => "merged",
            CurationAction::RemovedDuplicateGroup => "removed_duplicate_group",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogEntry {
    pub input_id: String,
    pub action: CurationAction,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub input_id: String,
    /// Machine-readable category, e.g. `parse:syntax` or `no_heavy_atoms`.
    pub reason: String,
}

/// Parses, desalts (largest component by heavy atoms, ties by smallest
/// canonical SMILES) and canonicalises one record. Isotopes are dropped by
/// the parser.
pub fn standardize(raw: &RawRecord) -> Result<(CompoundRecord, Option<LogEntry>), Rejection> {
    let reject = |reason: String| Rejection {
        input_id: raw.id.clone(),
        reason,
    };
    let a = activity_label(raw.activity_value, raw.activity_unit).map_err(|_| reject("non_positive_activity".into()))?;
    let parsed = parse_smiles(&raw.smiles).map_err(|e| reject(format!("parse:{}", e.kind())))?;
    let components = parsed.components();
    let (mol, note) = if components.len() == 1 {
        (parsed, None)
    } else {
        let mut best: Option<(usize, String, Molecule)> = None;
        for comp in &components {
            let sub = parsed.subgraph(comp);
            let heavy = sub.heavy_atom_count();
            let smiles = write_canonical_smiles(&sub);
            let better = match &best {
                None => true,
                Some((h, s, _)) => heavy > *h || (heavy == *h && smiles < *s),
            };
            if better {
                best = Some((heavy, smiles, sub));
            }
        }
        let (_, _, sub) = best.expect("at least two components");
        let entry = LogEntry {
            input_id: raw.id.clone(),
            action: CurationAction::Desalted,
            reason: format!("dropped {} component(s)", components.len() - 1),
        };
        (sub, Some(entry))
    };
    if mol.heavy_atom_count() == 0 {
        return Err(reject("no_heavy_atoms".into()));
    }
    let canonical_smiles = write_canonical_smiles(&mol);
    Ok((
        CompoundRecord {
            id: raw.id.clone(),
            canonical_smiles,
            mol,
            activity_value: raw.activity_value,
            unit: raw.activity_unit,
            a,
        },
        note,
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurationStats {
    pub input: usize,
    pub rejected: usize,
    pub desalted: usize,
    pub unique: usize,
    pub merged_groups: usize,
    pub merged_members: usize,
    pub removed_groups: usize,
    pub removed_members: usize,
    pub curated: usize,
}

impl CurationStats {
    /// Every input row is accounted for exactly once.
    pub fn reconciles(&self) -> bool {
        self.input == self.rejected + self.unique + self.merged_members + self.removed_members
            && self.curated == self.unique + self.merged_groups
    }
}

#[derive(Clone, Debug)]
pub struct Curated {
    pub compounds: Vec<CompoundRecord>,
    pub log: Vec<LogEntry>,
    pub stats: CurationStats,
}

#[derive(Default)]
struct DedupCounts {
    unique: usize,
    merged_groups: usize,
    removed_groups: usize,
}

/// Groups by canonical SMILES. A group is replaced by one record at the
/// geometric mean activity (keeping the first member's id) when
/// max/min <= 10, otherwise the whole group is removed. Output keeps the
/// input order of each group's first member.
pub fn deduplicate(records: Vec<CompoundRecord>) -> (Vec<CompoundRecord>, Vec<LogEntry>) {
    let (out, log, _) = dedup_counted(records);
    (out, log)
}

fn dedup_counted(records: Vec<CompoundRecord>) -> (Vec<CompoundRecord>, Vec<LogEntry>, DedupCounts) {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<CompoundRecord>> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.canonical_smiles.clone()).or_default();
        if g.is_empty() {
            order.push(r.canonical_smiles.clone());
        }
        g.push(r);
    }
    let mut out = Vec::with_capacity(order.len());
    let mut log = Vec::new();
    let mut counts = DedupCounts::default();
    for key in order {
        let mut group = groups.remove(&key).expect("group exists");
        if group.len() == 1 {
            counts.unique += 1;
            out.push(group.pop().expect("one member"));
            continue;
        }
        let min = group.iter().map(|r| r.activity_value).fold(f64::INFINITY, f64::min);
        let max = group.iter().map(|r| r.activity_value).fold(0.0, f64::max);
        let ratio = max / min;
        if ratio <= DUPLICATE_RATIO_LIMIT {
            counts.merged_groups += 1;
            let mean_ln = group.iter().map(|r| libm::log(r.activity_value)).sum::<f64>() / group.len() as f64;
            let value = libm::exp(mean_ln);
            let keep_id = group[0].id.clone();
            for r in &group {
                log.push(LogEntry {
                    input_id: r.id.clone(),
                    action: CurationAction::Merged,
                    reason: format!("{} duplicates unified into {keep_id}, ratio {ratio:.4}", group.len()),
                });
            }
            let mut first = group.swap_remove(0);
            first.activity_value = value;
            first.a = -libm::log10(value);
            out.push(first);
        } else {
            counts.removed_groups += 1;
            for r in &group {
                log.push(LogEntry {
                    input_id: r.id.clone(),
                    action: CurationAction::RemovedDuplicateGroup,
                    reason: format!("{} duplicates with activity ratio {ratio:.4} > {DUPLICATE_RATIO_LIMIT}", group.len()),
                });
            }
        }
    }
    (out, log, counts)
}

/// Full curation of raw rows: standardize each, then deduplicate.
pub fn curate(raw: &[RawRecord]) -> Curated {
    let mut stats = CurationStats {
        input: raw.len(),
        ..CurationStats::default()
    };
    let mut log = Vec::new();
    let mut standardized = Vec::with_capacity(raw.len());
    for r in raw {
        match standardize(r) {
            Ok((rec, note)) => {
                if let Some(note) = note {
                    stats.desalted += 1;
                    log.push(note);
                }
                standardized.push(rec);
            }
            Err(rej) => {
                stats.rejected += 1;
                log.push(LogEntry {
                    input_id: rej.input_id,
                    action: CurationAction::Rejected,
                    reason: rej.reason,
                });
            }
        }
    }
    let (compounds, dedup_log, counts) = dedup_counted(standardized);
    stats.unique = counts.unique;
    stats.merged_groups = counts.merged_groups;
    stats.removed_groups = counts.removed_groups;
    for e in &dedup_log {
        match e.action {
            CurationAction::Merged => stats.merged_members += 1,
            _ => stats.removed_members += 1,
        }
    }
    stats.curated = compounds.len();
    let merged: BTreeSet<&str> = dedup_log
        .iter()
        .filter(|e| e.action == CurationAction::Merged)
        .map(|e| e.input_id.as_str())
        .collect();
    let kept: Vec<LogEntry> = compounds
        .iter()
        .filter(|c| !merged.contains(c.id.as_str()))
        .map(|c| LogEntry {
            input_id: c.id.clone(),
            action: CurationAction::Kept,
            reason: String::new(),
        })
        .collect();
    log.extend(kept);
    log.extend(dedup_log);
    Curated { compounds, log, stats }
}
