//! Profile CSV (`month,depth_m,speed_mps`) and layered-vector CSV
//! (`layer_index,depth_m,speed_mps`) readers and writers.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::month::Month;
use crate::profile::{DepthSchedule, Profile, SpeedBand};

pub const PROFILE_HEADER: [&str; 3] = ["month", "depth_m", "speed_mps"];
pub const LAYERED_HEADER: [&str; 3] = ["layer_index", "depth_m", "speed_mps"];

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn records(text: &str, path: &Path, header: [&str; 3]) -> Result<Vec<(u64, [String; 3])>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let head = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if head.is_empty() {
        return Err(parse_err(path, 1, "file is empty"));
    }
    if head.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}, found {:?}", header.join(","), head.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        out.push((line, [rec[0].to_string(), rec[1].to_string(), rec[2].to_string()]));
    }
    Ok(out)
}

fn number(path: &Path, line: u64, what: &str, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} {s:?} is not finite")));
    }
    Ok(v)
}

/// Parse profile CSV text. `path` only labels error messages.
pub fn parse_profiles(text: &str, path: &Path, band: SpeedBand) -> Result<Vec<Profile>> {
    let rows = records(text, path, PROFILE_HEADER)?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    let mut seen = BTreeSet::new();
    let mut groups: Vec<(Month, u64, Vec<(f64, f64)>)> = Vec::new();
    for (line, [m, d, v]) in rows {
        let month: Month = m
            .parse()
            .map_err(|_| parse_err(path, line, format!("month {m:?} is not YYYY-MM")))?;
        let depth = number(path, line, "depth", &d)?;
        let speed = number(path, line, "speed", &v)?;
        match groups.last_mut() {
            Some((cur, _, samples)) if *cur == month => {
                let prev = samples.last().map(|s| s.0).unwrap_or(f64::NEG_INFINITY);
                if depth <= prev {
                    return Err(parse_err(path, line, format!("depth {depth} not ascending in {month}")));
                }
                samples.push((depth, speed));
            }
            _ => {
                if !seen.insert(month) {
                    return Err(parse_err(path, line, format!("duplicate month {month}")));
                }
                if let Some((prev, _, _)) = groups.last() {
                    if month < *prev {
                        return Err(parse_err(path, line, format!("month {month} follows {prev}")));
                    }
                }
                groups.push((month, line, vec![(depth, speed)]));
            }
        }
    }
    groups
        .into_iter()
        .map(|(month, line, samples)| {
            Profile::with_band(month, samples, band).map_err(|e| parse_err(path, line, e.to_string()))
        })
        .collect()
}

pub fn read_profiles(path: &Path) -> Result<Vec<Profile>> {
    read_profiles_with(path, SpeedBand::DEFAULT)
}

pub fn read_profiles_with(path: &Path, band: SpeedBand) -> Result<Vec<Profile>> {
    let text = std::fs::read_to_string(path)?;
    parse_profiles(&text, path, band)
}

pub fn write_profiles(profiles: &[Profile]) -> String {
    let mut out = PROFILE_HEADER.join(",");
    out.push('\n');
    for p in profiles {
        for &(d, v) in p.samples() {
            writeln!(out, "{},{d:.6},{v:.6}", p.month()).unwrap();
        }
    }
    out
}

pub fn write_layered(values: &[f64], sched: &DepthSchedule) -> Result<String> {
    if values.len() != sched.len() {
        return Err(Error::dim("layered vector", sched.len(), values.len()));
    }
    let mut out = LAYERED_HEADER.join(",");
    out.push('\n');
    for (j, (d, v)) in sched.levels().iter().zip(values).enumerate() {
        writeln!(out, "{j},{d:.6},{v:.6}").unwrap();
    }
    Ok(out)
}

/// Parse a layered-vector CSV into (depth, speed) pairs ordered by layer index.
pub fn parse_layered(text: &str, path: &Path) -> Result<Vec<(f64, f64)>> {
    let rows = records(text, path, LAYERED_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, [j, d, v]) in rows {
        let idx: usize = j
            .parse()
            .map_err(|_| parse_err(path, line, format!("layer index {j:?} is not an integer")))?;
        if idx != out.len() {
            return Err(parse_err(path, line, format!("expected layer {}, found {idx}", out.len())));
        }
        out.push((number(path, line, "depth", &d)?, number(path, line, "speed", &v)?));
    }
    if out.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(out)
}
