//! Result files and their run manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::sweep::MetricRecord;
use crate::BenchError;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub master_seed: u64,
    pub version: String,
    /// Estimators in the file that are comparison stand-ins rather than
    /// reference implementations.
    pub baseline_stand_ins: Vec<String>,
}

impl Manifest {
    pub fn new(config_text: &str, master_seed: u64, baseline_stand_ins: Vec<String>) -> Self {
        let digest = Sha256::digest(config_text.as_bytes());
        Self {
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            master_seed,
            version: VERSION.to_owned(),
            baseline_stand_ins,
        }
    }
}

/// `results.csv` -> `results.manifest.json`
pub fn manifest_path(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

/// Writes `rows` with the given header (also for an empty table).
pub fn write_table<T: Serialize, W: Write>(
    rows: &[T],
    columns: &[&str],
    format: Format,
    out: W,
) -> Result<(), BenchError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(columns)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_table<T: DeserializeOwned>(path: &Path, format: Format) -> Result<Vec<T>, BenchError> {
    let file = File::open(path)?;
    Ok(match format {
        Format::Csv => csv::Reader::from_reader(file).deserialize().collect::<Result<_, _>>()?,
        Format::Json => serde_json::from_reader(file)?,
    })
}

/// Writes the records to `path` and the manifest next to it.
pub fn emit_results(
    records: &[MetricRecord],
    path: &Path,
    format: Format,
    manifest: &Manifest,
) -> Result<(), BenchError> {
    emit_table(records, &MetricRecord::COLUMNS, path, format, manifest)
}

pub fn emit_table<T: Serialize>(
    rows: &[T],
    columns: &[&str],
    path: &Path,
    format: Format,
    manifest: &Manifest,
) -> Result<(), BenchError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_table(rows, columns, format, &mut out)?;
    out.flush()?;
    let mut m = BufWriter::new(File::create(manifest_path(path))?);
    serde_json::to_writer_pretty(&mut m, manifest)?;
    m.write_all(b"\n")?;
    m.flush()?;
    Ok(())
}
