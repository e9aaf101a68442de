//! `STPM` mode container (little-endian):
//!
//! `b"STPM"`, `u32` version, `u32` method tag, `u64` N, `u64` d, `u64` r,
//! `f64` dt, `N` weights, `r` energies, `N*d*r` mode entries column-major,
//! then a trailer of `u64` column spacing `s` and `u64` realizations `m_used`.
//!
//! Method tags: 0 space-only, 1 hankel, 2 spaced, 3 toeplitz.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Method, ModeDiagnostics, ModeSet, WeightSpec};
use crate::embedding::EmbeddingSpec;
use crate::error::{Error, Result};

pub const STPM_MAGIC: &[u8; 4] = b"STPM";
pub const STPM_VERSION: u32 = 1;

pub fn encode(modes: &ModeSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(STPM_MAGIC);
    out.extend_from_slice(&STPM_VERSION.to_le_bytes());
    out.extend_from_slice(&modes.method.tag().to_le_bytes());
    for v in [modes.n, modes.d(), modes.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&modes.dt.to_le_bytes());
    for v in modes
        .weight
        .as_slice()
        .iter()
        .chain(&modes.energies)
        .chain(modes.modes.iter())
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let s = modes.embedding.map_or(1, |e| e.s);
    out.extend_from_slice(&(s as u64).to_le_bytes());
    out.extend_from_slice(&(modes.m_used as u64).to_le_bytes());
    out
}

/// Parsed fixed header: (version, method tag, N, d, r, dt).
pub fn header(bytes: &[u8]) -> std::result::Result<(u32, u32, u64, u64, u64, f64), String> {
    if bytes.len() < 44 {
        return Err(format!("truncated header: {} bytes", bytes.len()));
    }
    if &bytes[..4] != STPM_MAGIC {
        return Err("bad magic, expected \"STPM\"".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    Ok((
        u32_at(4),
        u32_at(8),
        u64_at(12),
        u64_at(20),
        u64_at(28),
        f64::from_le_bytes(bytes[36..44].try_into().unwrap()),
    ))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<ModeSet, String> {
    let (version, tag, n, d, r, dt) = header(bytes)?;
    if version != STPM_VERSION {
        return Err(format!("unsupported STPM version {version}"));
    }
    let method = Method::from_tag(tag).ok_or_else(|| format!("unknown method tag {tag}"))?;
    let (n, d, r) = (n as usize, d as usize, r as usize);
    let floats = n + r + n * d * r;
    let expected = 44 + 8 * floats + 16;
    if bytes.len() != expected {
        return Err(format!(
            "dimension mismatch: N={n}, d={d}, r={r} needs {expected} bytes, file has {}",
            bytes.len()
        ));
    }
    let vals: Vec<f64> = bytes[44..44 + 8 * floats]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let trailer = &bytes[44 + 8 * floats..];
    let s = u64::from_le_bytes(trailer[..8].try_into().unwrap()) as usize;
    let m_used = u64::from_le_bytes(trailer[8..].try_into().unwrap()) as usize;
    let weight = WeightSpec::diagonal(vals[..n].to_vec()).map_err(|e| e.to_string())?;
    let embedding = match method {
        Method::SpaceOnly => None,
        _ => Some(EmbeddingSpec::new(d, s, dt).map_err(|e| e.to_string())?),
    };
    Ok(ModeSet {
        energies: vals[n..n + r].to_vec(),
        modes: DMatrix::from_column_slice(n * d, r, &vals[n + r..]),
        method,
        embedding,
        n,
        dt,
        weight,
        m_used,
        diagnostics: ModeDiagnostics::default(),
    })
}

pub fn save(modes: &ModeSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(modes)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModeSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|m| Error::format(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::spacetime_pod;
    use crate::timeseries::SnapshotSeries;

    #[test]
    fn round_trip() {
        let s = SnapshotSeries::from_snapshots(
            &(0..12).map(|k| vec![(k as f64).sin(), (0.3 * k as f64).cos()]).collect::<Vec<_>>(),
            0.1,
        )
        .unwrap();
        let modes = spacetime_pod(&s, 3, 2, &WeightSpec::diagonal(vec![1.5, 0.5]).unwrap()).unwrap();
        let bytes = encode(&modes);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.modes, modes.modes);
        assert_eq!(back.energies, modes.energies);
        assert_eq!(back.embedding, modes.embedding);
        assert_eq!(back.m_used, modes.m_used);
        assert_eq!(back.method, Method::Spaced);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
    }
}
