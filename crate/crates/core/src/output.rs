//! Run-directory persistence. Column layouts are documented in
//! `docs/formats.md`; floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::ArchiveEntry;
use crate::sensitivity::SobolReport;
use crate::stochastic::{InputSet, SampleMatrix, N_INPUTS};

pub const ARCHIVE_HEADER: &str = "gen,x1,x2,x3,x4,x5,x6,mean,std,rsd,rank";

/// Float with 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Format {
        what: what.into(),
        reason: format!("line {line}: `{field}` is not a number"),
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Creates `dir`, refusing to reuse a non-empty directory unless `overwrite`.
pub fn prepare_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !overwrite {
            return Err(Error::config(
                "output.directory",
                format!("{} is not empty; set output.overwrite = true to reuse it", dir.display()),
            ));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn archive_csv(entries: &[ArchiveEntry]) -> String {
    let mut out = String::from(ARCHIVE_HEADER);
    out.push('\n');
    for e in entries {
        let _ = write!(out, "{}", e.generation);
        for g in &e.genes {
            let _ = write!(out, ",{}", fmt_f64(*g));
        }
        let _ = writeln!(out, ",{},{},{},{}", fmt_f64(e.mean), fmt_f64(e.std), fmt_f64(e.rsd), e.rank);
    }
    out
}

pub fn read_archive_csv(path: &Path) -> Result<Vec<ArchiveEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_archive_csv(&text)
}

pub fn parse_archive_csv(text: &str) -> Result<Vec<ArchiveEntry>> {
    let what = "archive.csv";
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == ARCHIVE_HEADER => {}
        other => {
            return Err(Error::Format {
                what: what.into(),
                reason: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_INPUTS + 5 {
            return Err(Error::Format {
                what: what.into(),
                reason: format!("line {lineno}: expected {} columns, got {}", N_INPUTS + 5, fields.len()),
            });
        }
        let int = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| Error::Format {
                what: what.into(),
                reason: format!("line {lineno}: `{s}` is not an integer"),
            })
        };
        let genes = fields[1..=N_INPUTS]
            .iter()
            .map(|f| parse_f64(f, what, lineno))
            .collect::<Result<Vec<_>>>()?;
        entries.push(ArchiveEntry {
            generation: int(fields[0])?,
            genes,
            mean: parse_f64(fields[N_INPUTS + 1], what, lineno)?,
            std: parse_f64(fields[N_INPUTS + 2], what, lineno)?,
            rsd: parse_f64(fields[N_INPUTS + 3], what, lineno)?,
            rank: int(fields[N_INPUTS + 4])?,
        });
    }
    Ok(entries)
}

pub fn sobol_csv(report: &SobolReport) -> String {
    let mut out = String::from("input,scale,first_order,total\n");
    for e in &report.entries {
        let _ = writeln!(out, "{},{},{},{}", e.input, e.scale.as_str(), fmt_f64(e.first_order), fmt_f64(e.total));
    }
    out
}

/// Bar-chart data: one row per input with its first-order index and the
/// scale used as the color key.
pub fn sobol_bars(report: &SobolReport) -> String {
    let mut out = String::from("# input first_order scale\n");
    for e in &report.entries {
        let _ = writeln!(out, "{} {} {}", e.input, fmt_f64(e.first_order), e.scale.as_str());
    }
    out
}

pub fn cloud_dat(entries: &[ArchiveEntry], rsd_limit: f64) -> String {
    let mut out = String::from("# mean rsd feasible\n");
    for e in entries {
        let _ = writeln!(out, "{} {} {}", fmt_f64(e.mean), fmt_f64(e.rsd), u8::from(e.rsd <= rsd_limit));
    }
    out
}

/// One file body per input: mean response against that input's value for
/// every RSD-feasible archive member.
pub fn scatter_dats(entries: &[ArchiveEntry], inputs: &InputSet, rsd_limit: f64) -> Vec<(String, String)> {
    inputs
        .specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let mut out = format!("# mean {} scale\n", spec.name);
            for e in entries.iter().filter(|e| e.rsd <= rsd_limit) {
                let _ = writeln!(out, "{} {} {}", fmt_f64(e.mean), fmt_f64(e.genes[i]), spec.scale.as_str());
            }
            (format!("scatter_{}.dat", spec.name), out)
        })
        .collect()
}

pub fn samples_csv(samples: &SampleMatrix, sigma6: &[f64]) -> String {
    let mut out = String::from("sample_index,x1,x2,x3,x4,x5,x6,sigma6\n");
    for (k, (row, s)) in samples.realizations.iter().zip(sigma6).enumerate() {
        let _ = write!(out, "{k}");
        for x in row {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        let _ = writeln!(out, ",{}", fmt_f64(*s));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub uq: u64,
    pub pce: u64,
    pub ga: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<ManifestFile>,
}

pub fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Writes `manifest.json` listing `files` (relative to `dir`) with their sizes.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config: &crate::config::RunConfig,
    started_unix_ms: u128,
    files: &[PathBuf],
) -> Result<RunManifest> {
    let mut listed = Vec::with_capacity(files.len());
    for f in files {
        let meta = fs::metadata(f).map_err(|e| Error::io(f, e))?;
        let name = f
            .strip_prefix(dir)
            .unwrap_or(f)
            .to_string_lossy()
            .into_owned();
        listed.push(ManifestFile { name, bytes: meta.len() });
    }
    listed.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_sha256: config.hash(),
        seeds: Seeds {
            uq: config.uq.seed,
            pce: config.pce.seed,
            ga: config.ga.seed,
        },
        started_unix_ms,
        finished_unix_ms: unix_ms(),
        files: listed,
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&path, &(body + "\n"))?;
    Ok(manifest)
}
