//! Module-native CSV and JSON files.

use crate::error::{Error, Result};
use crate::resonance::ComplexTrace;
use crate::ringdown::RingdownShot;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

fn file_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::File { path: path.display().to_string(), message: e.to_string() }
}

/// Read every row of a headed CSV file.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| file_error(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| file_error(path, e))).collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| file_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| file_error(path, e))?;
    }
    w.flush().map_err(|e| file_error(path, e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| file_error(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| file_error(path, e))
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| file_error(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Hex SHA-256 over the bytes of several files, in order.
pub fn sha256_files(paths: &[std::path::PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        h.update(fs::read(p).map_err(|e| file_error(p, e))?);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub freq_hz: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceRow {
    pub freq_hz: f64,
    pub re_siemens: f64,
    pub im_siemens: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRow {
    pub time_s: f64,
    pub i: f64,
    pub q: f64,
}

pub fn read_trace(path: &Path) -> Result<ComplexTrace> {
    let rows: Vec<TraceRow> = read_csv(path)?;
    ComplexTrace::new(
        rows.iter().map(|r| r.freq_hz).collect(),
        rows.iter().map(|r| Complex64::new(r.re, r.im)).collect(),
    )
    .map_err(|e| file_error(path, e))
}

pub fn write_trace(path: &Path, t: &ComplexTrace) -> Result<()> {
    let rows: Vec<TraceRow> =
        t.freq_hz.iter().zip(&t.s).map(|(&f, z)| TraceRow { freq_hz: f, re: z.re, im: z.im }).collect();
    write_csv(path, &rows)
}

pub fn read_admittance(path: &Path) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let rows: Vec<AdmittanceRow> = read_csv(path)?;
    Ok((
        rows.iter().map(|r| r.freq_hz).collect(),
        rows.iter().map(|r| Complex64::new(r.re_siemens, r.im_siemens)).collect(),
    ))
}

pub fn write_admittance(path: &Path, freq_hz: &[f64], y: &[Complex64]) -> Result<()> {
    let rows: Vec<AdmittanceRow> = freq_hz
        .iter()
        .zip(y)
        .map(|(&f, z)| AdmittanceRow { freq_hz: f, re_siemens: z.re, im_siemens: z.im })
        .collect();
    write_csv(path, &rows)
}

pub fn read_shot(path: &Path) -> Result<RingdownShot> {
    let rows: Vec<ShotRow> = read_csv(path)?;
    let time: Vec<f64> = rows.iter().map(|r| r.time_s).collect();
    RingdownShot::new(&time, rows.iter().map(|r| r.i).collect(), rows.iter().map(|r| r.q).collect())
        .map_err(|e| file_error(path, e))
}

pub fn write_shot(path: &Path, shot: &RingdownShot) -> Result<()> {
    let rows: Vec<ShotRow> = shot
        .time()
        .into_iter()
        .zip(shot.i.iter().zip(&shot.q))
        .map(|(t, (&i, &q))| ShotRow { time_s: t, i, q })
        .collect();
    write_csv(path, &rows)
}

/// Acquisition record stored next to a directory of shot files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotManifest {
    pub shots: usize,
    pub sample_rate: f64,
    /// End of the pump pulse, s.
    pub t_on: f64,
    pub t_total: f64,
    pub files: Vec<String>,
}

/// Write `shots` as `shot_NNN.csv` plus `manifest.json` into `dir`.
pub fn write_shot_dir(dir: &Path, shots: &[RingdownShot], t_on: f64) -> Result<ShotManifest> {
    fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
    let mut files = Vec::with_capacity(shots.len());
    for (k, s) in shots.iter().enumerate() {
        let name = format!("shot_{k:03}.csv");
        write_shot(&dir.join(&name), s)?;
        files.push(name);
    }
    let first = shots.first().ok_or_else(|| Error::InvalidInput("no shots to write".into()))?;
    let m = ShotManifest {
        shots: shots.len(),
        sample_rate: 1.0 / first.dt,
        t_on,
        t_total: first.t_start + first.len() as f64 * first.dt,
        files,
    };
    write_json(&dir.join("manifest.json"), &m)?;
    Ok(m)
}

pub fn read_shot_dir(dir: &Path) -> Result<(ShotManifest, Vec<RingdownShot>)> {
    let m: ShotManifest = read_json(&dir.join("manifest.json"))?;
    let shots = m.files.iter().map(|f| read_shot(&dir.join(f))).collect::<Result<Vec<_>>>()?;
    Ok((m, shots))
}
