//! A small synthetic activity data set with designed activity cliffs, used
//! for smoke tests and demonstrations.

use std::path::Path;

use crate::error::Result;
use crate::io;

/// Scaffolds with one substitution site `X`.
const SCAFFOLDS: [&str; 5] = [
    "O=C(NC1CC1)c1ccc(X)cc1",
    "Cc1nc2ccc(X)cc2o1",
    "CN1CCN(c2ccc(X)cc2)CC1",
    "COc1cc(X)ccc1OC",
    "O=C1CCc2cc(X)ccc2N1",
];

const R_GROUPS: [&str; 12] = ["F", "Cl", "Br", "C", "CC", "OC", "N", "C(F)(F)F", "C#N", "O", "CCC", "C(=O)O"];

/// Additive potency contribution of each R-group (log units).
const R_EFFECT: [f64; 12] = [0.0, 0.3, 0.5, 0.2, 0.4, 0.1, 0.6, 0.7, 0.25, 0.45, 0.55, 0.15];

const SCAFFOLD_BASE: [f64; 5] = [6.0, 6.5, 5.5, 7.0, 6.2];

/// Each scaffold has two R-groups that jump in potency, creating cliffs.
const CLIFFS: [[usize; 2]; 5] = [[2, 7], [0, 9], [4, 11], [1, 6], [3, 8]];
const CLIFF_JUMP: f64 = 2.5;

pub struct ToyRow {
    pub id: String,
    pub smiles: String,
    pub value_nm: f64,
}

fn value_nm(potency: f64) -> f64 {
    // potency p corresponds to 10^(9 - p) nM
    10f64.powf(9.0 - potency)
}

/// 60 designed compounds plus a salt form, a mergeable duplicate and a
/// conflicting duplicate pair (which curation removes).
pub fn rows() -> Vec<ToyRow> {
    let mut out = Vec::new();
    for (s, scaffold) in SCAFFOLDS.iter().enumerate() {
        for (r, group) in R_GROUPS.iter().enumerate() {
            let jitter = ((s * 7 + r * 13) % 10) as f64 / 40.0;
            let cliff = if CLIFFS[s].contains(&r) { CLIFF_JUMP } else { 0.0 };
            let potency = SCAFFOLD_BASE[s] + R_EFFECT[r] + jitter + cliff;
            out.push(ToyRow {
                id: format!("T{:03}", s * R_GROUPS.len() + r + 1),
                smiles: scaffold.replace('X', group),
                value_nm: value_nm(potency),
            });
        }
    }
    let salt = out[3].smiles.clone() + ".Cl";
    out[3].smiles = salt;
    let first = &out[0];
    let dup = ToyRow {
        id: "T901".into(),
        smiles: first.smiles.clone(),
        value_nm: first.value_nm * 2.0,
    };
    out.push(dup);
    out.push(ToyRow {
        id: "T902".into(),
        smiles: "CCCCCCCCO".into(),
        value_nm: 10.0,
    });
    out.push(ToyRow {
        id: "T903".into(),
        smiles: "OCCCCCCCC".into(),
        value_nm: 5000.0,
    });
    out
}

pub fn write_csv(path: &Path) -> Result<usize> {
    let rows: Vec<Vec<String>> = rows()
        .into_iter()
        .map(|r| vec![r.id, r.smiles, r.value_nm.to_string(), "nM".into()])
        .collect();
    io::write_table(path, &io::ACTIVITY_COLUMNS, &rows)?;
    Ok(rows.len())
}
