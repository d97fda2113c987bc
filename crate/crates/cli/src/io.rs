//! File formats of the pipeline artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use cliffbench_core::chem::{parse_smiles, GraphKey};
use cliffbench_core::curation::{ActivityUnit, CompoundRecord, LogEntry, RawRecord};
use cliffbench_core::mmp::{AcClass, MmpRecord, PotencyDirection};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const ACTIVITY_COLUMNS: [&str; 4] = ["id", "smiles", "activity_value", "activity_unit"];

/// A data row that could not be turned into a [`RawRecord`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowError {
    /// 1-based line number in the file.
    pub line: u64,
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct ActivityTable {
    pub records: Vec<RawRecord>,
    pub errors: Vec<RowError>,
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Reads `id,smiles,activity_value,activity_unit` (extra columns ignored).
/// Missing columns or a file without data rows are errors; bad rows are
/// reported in [`ActivityTable::errors`].
pub fn load_activity_csv(path: &Path) -> Result<ActivityTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(ACTIVITY_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!(
                "{}: missing column {name:?} (expected {})",
                path.display(),
                ACTIVITY_COLUMNS.join(",")
            ))
        })?;
    }
    let mut table = ActivityTable::default();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |k: usize| row.get(col[k]).unwrap_or("");
        let id = field(0).to_string();
        let mut fail = |reason: String| {
            table.errors.push(RowError {
                line,
                id: id.clone(),
                reason,
            })
        };
        if row.len() < headers.len() {
            fail(format!("expected {} fields, found {}", headers.len(), row.len()));
            continue;
        }
        if id.is_empty() {
            fail("empty id".into());
            continue;
        }
        let smiles = field(1);
        if smiles.is_empty() {
            fail("empty smiles".into());
            continue;
        }
        let value: f64 = match field(2).parse() {
            Ok(v) if v > 0.0 && f64::is_finite(v) => v,
            Ok(v) => {
                fail(format!("non_positive_activity: {v}"));
                continue;
            }
            Err(_) => {
                fail(format!("unparseable activity value {:?}", field(2)));
                continue;
            }
        };
        let unit: ActivityUnit = match field(3).parse() {
            Ok(u) => u,
            Err(e) => {
                fail(format!("unknown_unit: {e}"));
                continue;
            }
        };
        table.records.push(RawRecord {
            id,
            smiles: smiles.to_string(),
            activity_value: value,
            activity_unit: unit,
        });
    }
    if table.records.is_empty() && table.errors.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(table)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(create(path)?))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct CuratedRow {
    id: String,
    smiles: String,
    activity_value: f64,
    activity_unit: ActivityUnit,
    canonical_smiles: String,
    a: f64,
    config_digest: String,
}

/// The curated table; `smiles` holds the canonical form so that the file is
/// itself a valid curation input.
pub fn write_curated(path: &Path, compounds: &[CompoundRecord], digest: &str) -> Result<()> {
    let mut w = csv_writer(path)?;
    for c in compounds {
        w.serialize(CuratedRow {
            id: c.id.clone(),
            smiles: c.canonical_smiles.clone(),
            activity_value: c.activity_value,
            activity_unit: c.unit,
            canonical_smiles: c.canonical_smiles.clone(),
            a: c.a,
            config_digest: digest.to_string(),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_curated(path: &Path) -> Result<Vec<CompoundRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<CuratedRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let mol = parse_smiles(&row.canonical_smiles)
            .map_err(|e| CliError::Data(format!("{}: compound {}: {e}", path.display(), row.id)))?;
        out.push(CompoundRecord {
            id: row.id,
            canonical_smiles: row.canonical_smiles,
            mol,
            activity_value: row.activity_value,
            unit: row.activity_unit,
            a: row.a,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct LogLine<'a> {
    input_id: &'a str,
    action: &'a str,
    reason: &'a str,
    config_digest: &'a str,
}

/// One JSON object per line: `{input_id, action, reason, config_digest}`.
pub fn write_curation_log(path: &Path, log: &[LogEntry], row_errors: &[RowError], digest: &str) -> Result<()> {
    let mut w = create(path)?;
    let mut line = |l: LogLine<'_>| -> Result<()> {
        serde_json::to_writer(&mut w, &l).map_err(|e| CliError::Runtime(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))
    };
    for e in row_errors {
        line(LogLine {
            input_id: &e.id,
            action: "rejected",
            reason: &format!("line {}: {}", e.line, e.reason),
            config_digest: digest,
        })?;
    }
    for e in log {
        line(LogLine {
            input_id: &e.input_id,
            action: e.action.as_str(),
            reason: &e.reason,
            config_digest: digest,
        })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct MmpRow {
    mmp_id: usize,
    index_1: usize,
    index_2: usize,
    id_1: String,
    id_2: String,
    smiles_1: String,
    smiles_2: String,
    core_smiles: String,
    core_key: String,
    core_heavy: usize,
    var_1: String,
    var_2: String,
    a_1: f64,
    a_2: f64,
    ac_class: String,
    pd: String,
    delta_log: f64,
    cut_multiplicity: usize,
    config_digest: String,
}

pub fn write_mmps(path: &Path, mmps: &[MmpRecord], digest: &str) -> Result<()> {
    let mut w = csv_writer(path)?;
    if mmps.is_empty() {
        // an empty table still carries its header
        let header = [
            "mmp_id", "index_1", "index_2", "id_1", "id_2", "smiles_1", "smiles_2", "core_smiles", "core_key",
            "core_heavy", "var_1", "var_2", "a_1", "a_2", "ac_class", "pd", "delta_log", "cut_multiplicity",
            "config_digest",
        ];
        w.write_record(header).map_err(|e| csv_error(path, e))?;
    }
    for m in mmps {
        w.serialize(MmpRow {
            mmp_id: m.mmp_id,
            index_1: m.index_1,
            index_2: m.index_2,
            id_1: m.id_1.clone(),
            id_2: m.id_2.clone(),
            smiles_1: m.smiles_1.clone(),
            smiles_2: m.smiles_2.clone(),
            core_smiles: m.core_smiles.clone(),
            core_key: m.core_key.to_hex(),
            core_heavy: m.core_heavy,
            var_1: m.var_1.clone(),
            var_2: m.var_2.clone(),
            a_1: m.a_1,
            a_2: m.a_2,
            ac_class: m.ac_class.as_str().to_string(),
            pd: m.pd.as_str().to_string(),
            delta_log: m.delta_log,
            cut_multiplicity: m.cut_multiplicity,
            config_digest: digest.to_string(),
        })
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_mmps(path: &Path) -> Result<Vec<MmpRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let bad = |what: &str, id: usize| CliError::Data(format!("{}: MMP {id}: bad {what}", path.display()));
    let mut out = Vec::new();
    for row in reader.deserialize::<MmpRow>() {
        let r = row.map_err(|e| csv_error(path, e))?;
        out.push(MmpRecord {
            mmp_id: r.mmp_id,
            index_1: r.index_1,
            index_2: r.index_2,
            id_1: r.id_1,
            id_2: r.id_2,
            smiles_1: r.smiles_1,
            smiles_2: r.smiles_2,
            core_smiles: r.core_smiles,
            core_key: GraphKey::from_hex(&r.core_key).ok_or_else(|| bad("core_key", r.mmp_id))?,
            core_heavy: r.core_heavy,
            var_1: r.var_1,
            var_2: r.var_2,
            a_1: r.a_1,
            a_2: r.a_2,
            ac_class: AcClass::parse(&r.ac_class).ok_or_else(|| bad("ac_class", r.mmp_id))?,
            pd: PotencyDirection::parse(&r.pd).ok_or_else(|| bad("pd", r.mmp_id))?,
            delta_log: r.delta_log,
            cut_multiplicity: r.cut_multiplicity,
        });
    }
    Ok(out)
}

/// One out-of-training or in-training prediction of one model in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub model: String,
    pub i: usize,
    pub j: usize,
    pub compound: usize,
    pub in_train: bool,
    pub prediction: f64,
    pub config_digest: String,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))
}

/// Writes `rows` of string cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}
