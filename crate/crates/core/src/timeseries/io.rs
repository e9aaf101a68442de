//! Series file formats.
//!
//! `stpd` (little-endian): `b"STPD"`, `u32` version, `u64` N, `u64` L,
//! `f64` dt, then `N*L` `f64` values column-major (snapshot by snapshot).
//!
//! `csv`: first line `dt=<value>`, then one snapshot per line with `N`
//! comma-separated values.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::SnapshotSeries;
use crate::error::{Error, Result};

pub const STPD_MAGIC: &[u8; 4] = b"STPD";
pub const STPD_VERSION: u32 = 1;
const STPD_HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    Stpd,
}

impl SeriesFormat {
    /// Picks the format from the file extension; anything but `.csv` is `stpd`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => SeriesFormat::Csv,
            _ => SeriesFormat::Stpd,
        }
    }
}

pub fn load(path: impl AsRef<Path>, format: SeriesFormat) -> Result<SnapshotSeries> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        SeriesFormat::Stpd => decode_stpd(&bytes).map_err(|m| Error::format(path, m)),
        SeriesFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| Error::format(path, "file is not UTF-8"))?;
            decode_csv(&text).map_err(|m| Error::format(path, m))
        }
    }
}

pub fn save(series: &SnapshotSeries, path: impl AsRef<Path>, format: SeriesFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        SeriesFormat::Stpd => encode_stpd(series),
        SeriesFormat::Csv => encode_csv(series).into_bytes(),
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_stpd(series: &SnapshotSeries) -> Vec<u8> {
    let mut out = Vec::with_capacity(STPD_HEADER_LEN + 8 * series.values().len());
    out.extend_from_slice(STPD_MAGIC);
    out.extend_from_slice(&STPD_VERSION.to_le_bytes());
    out.extend_from_slice(&(series.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(series.len() as u64).to_le_bytes());
    out.extend_from_slice(&series.dt().to_le_bytes());
    for v in series.values().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Header fields of an `stpd` file: (version, N, L, dt).
pub fn stpd_header(bytes: &[u8]) -> std::result::Result<(u32, u64, u64, f64), String> {
    if bytes.len() < STPD_HEADER_LEN {
        return Err(format!(
            "truncated header: {} bytes, need {STPD_HEADER_LEN}",
            bytes.len()
        ));
    }
    if &bytes[0..4] != STPD_MAGIC {
        return Err("bad magic, expected \"STPD\"".into());
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let l = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let dt = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    Ok((version, n, l, dt))
}

pub fn decode_stpd(bytes: &[u8]) -> std::result::Result<SnapshotSeries, String> {
    let (version, n, l, dt) = stpd_header(bytes)?;
    if version != STPD_VERSION {
        return Err(format!("unsupported stpd version {version}"));
    }
    if l == 0 {
        return Err("no snapshots".into());
    }
    let count = n
        .checked_mul(l)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| "header dimensions overflow".to_string())?;
    let payload = &bytes[STPD_HEADER_LEN..];
    if payload.len() as u64 != count {
        return Err(format!(
            "dimension mismatch: header says N={n}, L={l} ({count} payload bytes) but payload has {} bytes",
            payload.len()
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SnapshotSeries::new(DMatrix::from_vec(n as usize, l as usize, values), dt).map_err(|e| match e {
        Error::NonFinite { component, snapshot } => {
            format!("non-finite value at snapshot {snapshot}, component {component}")
        }
        other => other.to_string(),
    })
}

pub fn encode_csv(series: &SnapshotSeries) -> String {
    let mut out = format!("dt={}\n", series.dt());
    for k in 0..series.len() {
        let row: Vec<String> = series.snapshot(k).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str) -> std::result::Result<SnapshotSeries, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines.next().ok_or_else(|| "no snapshots".to_string())?;
    let dt: f64 = header
        .strip_prefix("dt=")
        .ok_or_else(|| format!("malformed header on line 1: expected \"dt=<value>\", got {header:?}"))?
        .trim()
        .parse()
        .map_err(|_| format!("malformed header on line 1: bad dt in {header:?}"))?;
    let mut n = None;
    let mut flat = Vec::new();
    let mut count = 0usize;
    for (line_no, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {line_no}: cannot parse value {:?}", v.trim()))
            })
            .collect::<std::result::Result<_, _>>()?;
        let expected = *n.get_or_insert(row.len());
        if row.len() != expected {
            return Err(format!(
                "line {line_no}: row has {} values, expected {expected}",
                row.len()
            ));
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(format!("line {line_no}: non-finite value in column {}", c + 1));
        }
        flat.extend(row);
        count += 1;
    }
    let n = n.ok_or_else(|| "no snapshots".to_string())?;
    SnapshotSeries::new(DMatrix::from_vec(n, count, flat), dt).map_err(|e| e.to_string())
}
