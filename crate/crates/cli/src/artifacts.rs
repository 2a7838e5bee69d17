//! Names and small text formats of the files written to the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use mrf_core::matching::{write_pgm16, ParameterMap};
use mrf_core::{Error, Result};

pub const PARAMS: &str = "params.csv";
pub const SEQUENCE: &str = "sequence.csv";
pub const DICTIONARY: &str = "dictionary.mrfd";
pub const TIMING: &str = "timing.csv";
pub const MODEL: &str = "model.gmrf";
pub const HISTORY: &str = "history.csv";
pub const CURVES: &str = "curves.csv";
pub const SPLIT: &str = "split.csv";
pub const LAMBDA: &str = "lambda.csv";
pub const SYNTH: &str = "synth.mrfd";
pub const TRUTH: &str = "phantom_truth.csv";
pub const REPORT: &str = "report.csv";
pub const SUMMARY: &str = "report.txt";

pub fn maps_file(label: &str) -> String {
    format!("maps_{label}.csv")
}

/// Writes through a sibling temp file so readers never see a partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_required(path: &Path) -> Result<String> {
    crate::config::require(path)?;
    Ok(fs::read_to_string(path)?)
}

/// One row of `timing.csv`. Cold start covers process start, config and
/// input loading; `wall_seconds` is the steady-state compute alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub stage: String,
    pub atoms: usize,
    pub frames: usize,
    pub cold_start_seconds: f64,
    pub wall_seconds: f64,
}

impl TimingRow {
    pub fn seconds_per_atom(&self) -> f64 {
        self.wall_seconds / self.atoms.max(1) as f64
    }
}

const TIMING_HEADER: &str = "stage,atoms,frames,cold_start_seconds,wall_seconds,seconds_per_atom";

pub fn read_timing(path: &Path) -> Result<Vec<TimingRow>> {
    parse_timing(&fs::read_to_string(path)?, &path.display().to_string())
}

/// Parses `timing.csv` text; `origin` names the source in error messages.
pub fn parse_timing(text: &str, origin: &str) -> Result<Vec<TimingRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TIMING_HEADER) {
        return Err(Error::Format(format!("{origin}: unexpected header")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("{origin}: bad row {line:?}"));
            if f.len() != 6 {
                return Err(bad());
            }
            Ok(TimingRow {
                stage: f[0].to_string(),
                atoms: f[1].parse().map_err(|_| bad())?,
                frames: f[2].parse().map_err(|_| bad())?,
                cold_start_seconds: f[3].parse().map_err(|_| bad())?,
                wall_seconds: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Replaces the row for `row.stage`, keeping the others.
pub fn upsert_timing(path: &Path, row: TimingRow) -> Result<()> {
    let mut rows = if path.exists() { read_timing(path)? } else { Vec::new() };
    rows.retain(|r| r.stage != row.stage);
    rows.push(row);
    let mut s = format!("{TIMING_HEADER}\n");
    for r in &rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.stage,
            r.atoms,
            r.frames,
            r.cold_start_seconds,
            r.wall_seconds,
            r.seconds_per_atom()
        ));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_map(path: &Path) -> Result<ParameterMap> {
    parse_map(&read_required(path)?, &path.display().to_string())
}

/// Parses the `x,y,t1,t2,similarity` CSV written for a parameter map. Every
/// pixel must appear exactly once.
pub fn parse_map(text: &str, origin: &str) -> Result<ParameterMap> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,t1,t2,similarity") {
        return Err(Error::Format(format!("{origin}: unexpected header")));
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let bad = || Error::Format(format!("{origin}: bad row {line:?}"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let x: usize = f[0].parse().map_err(|_| bad())?;
        let y: usize = f[1].parse().map_err(|_| bad())?;
        let v: Vec<f64> = f[2..].iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        rows.push((x, y, v[0], v[1], v[2]));
    }
    let width = rows.iter().map(|r| r.0.saturating_add(1)).max().unwrap_or(0);
    let height = rows.iter().map(|r| r.1.saturating_add(1)).max().unwrap_or(0);
    if width.checked_mul(height) != Some(rows.len()) {
        return Err(Error::Format(format!("{origin}: rows do not cover a full image")));
    }
    let mut map = ParameterMap {
        width,
        height,
        t1: vec![0.0; rows.len()],
        t2: vec![0.0; rows.len()],
        similarity: vec![0.0; rows.len()],
    };
    let mut seen = vec![false; rows.len()];
    for (x, y, t1, t2, s) in rows {
        let i = y * width + x;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Format(format!("{origin}: pixel ({x}, {y}) appears twice")));
        }
        (map.t1[i], map.t2[i], map.similarity[i]) = (t1, t2, s);
    }
    Ok(map)
}

/// Writes `<stem>.pgm` and its `<stem>.pgm.txt` scaling sidecar.
pub fn write_image(dir: &Path, stem: &str, values: &[f64], width: usize, height: usize, note: &str) -> Result<PathBuf> {
    let (bytes, scaling) = write_pgm16(values, width, height)?;
    let path = dir.join(format!("{stem}.pgm"));
    write_atomic(&path, &bytes)?;
    let sidecar = format!("{note}{}", scaling.to_sidecar_string());
    write_atomic(&dir.join(format!("{stem}.pgm.txt")), sidecar.as_bytes())?;
    Ok(path)
}
