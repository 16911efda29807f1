//! On-disk formats: CSV tables, binary snapshots and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::{DiagnosticRow, Snapshot};
use crate::error::{Result, SllgError};
use crate::wiener::SeedDescriptor;

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"SLLGSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "SLLG_THREADS";

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects files of one run so the manifest can checksum them.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| SllgError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        let mut f = fs::File::create(&path).map_err(|e| SllgError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| SllgError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.write(name, csv_table(header, rows).as_bytes())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn timeseries_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from(DiagnosticRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.csv_values().iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Header: magic (8 bytes), version, n_modes, components, snapshot count
/// (each u32). Each snapshot: step (u64), time (f64), then the
/// coefficients mode-major with components innermost. Little-endian.
pub fn encode_snapshots(n_modes: usize, snapshots: &[Snapshot]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + snapshots.len() * (16 + 24 * n_modes));
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    for v in [SNAPSHOT_VERSION, n_modes as u32, 3, snapshots.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in snapshots {
        out.extend_from_slice(&(s.step as u64).to_le_bytes());
        out.extend_from_slice(&s.time.to_le_bytes());
        for c in s.state.coeffs() {
            for x in c.0 {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSnapshot {
    pub step: u64,
    pub time: f64,
    pub coeffs: Vec<[f64; 3]>,
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<(usize, Vec<DecodedSnapshot>)> {
    let bad = |m: &str| SllgError::Diagnostics(format!("snapshot file: {m}"));
    if bytes.len() < 24 || bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    if word(0) != SNAPSHOT_VERSION {
        return Err(bad("unsupported version"));
    }
    let (n_modes, comps, count) = (word(1) as usize, word(2) as usize, word(3) as usize);
    if comps != 3 {
        return Err(bad("component count must be 3"));
    }
    let rec = 16 + 8 * comps * n_modes;
    if bytes.len() != 24 + count * rec {
        return Err(bad("length does not match header"));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let snaps = (0..count)
        .map(|k| {
            let base = 24 + k * rec;
            DecodedSnapshot {
                step: u64::from_le_bytes(bytes[base..base + 8].try_into().unwrap()),
                time: f(base + 8),
                coeffs: (0..n_modes)
                    .map(|j| {
                        let o = base + 16 + 24 * j;
                        [f(o), f(o + 8), f(o + 16)]
                    })
                    .collect(),
            }
        })
        .collect();
    Ok((n_modes, snaps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub generator: String,
    pub version: String,
    pub seeds: Vec<SeedDescriptor>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_entry(dir: &Path, name: &str) -> Result<FileEntry> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| SllgError::io(&path, e))?;
    Ok(FileEntry {
        name: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

impl RunManifest {
    /// Checksums every file written so far and stores `manifest.json`.
    pub fn write(mut self, dir: &OutputDir) -> Result<()> {
        self.files = dir
            .files()
            .iter()
            .map(|n| file_entry(dir.root(), n))
            .collect::<Result<_>>()?;
        let path = dir.root().join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| SllgError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SllgError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| SllgError::config(path.display().to_string(), e.to_string()))
    }

    /// Names of inventory files whose checksum no longer matches.
    pub fn verify_files(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            if file_entry(dir, &f.name)? != *f {
                bad.push(f.name.clone());
            }
        }
        Ok(bad)
    }
}

/// Worker count from the environment, falling back to the config value.
pub fn thread_count(config_threads: Option<usize>) -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|t: &usize| *t >= 1)
        .or(config_threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Vec3;
    use crate::spectral::{FieldCoeffs, SpectralBasis};

    #[test]
    fn floats_round_trip_through_text() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            0.0,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn timeseries_layout() {
        let row = DiagnosticRow {
            time: 0.5,
            l2: 1.0,
            v_norm: 2.0,
            energy: 3.0,
            exchange: 2.0,
            anisotropy: 1.0,
            cum_dissipation: 0.25,
            sphere_dev: 1e-3,
            xneg_beta: 0.125,
            cum_damping_l32: 9.0,
            cum_damping_xneg: 9.0,
        };
        let text = timeseries_csv(&[row]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "time,l2,v_norm,energy,exchange,anisotropy,cum_dissipation,sphere_dev,xneg_beta"
        );
        let vals: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, vec![0.5, 1.0, 2.0, 3.0, 2.0, 1.0, 0.25, 1e-3, 0.125]);
    }

    #[test]
    fn snapshot_round_trip() {
        let b = SpectralBasis::shared(1.0, 3, 4).unwrap();
        let mut u = FieldCoeffs::zeros(b.clone());
        u.coeffs_mut()[1] = Vec3::new(1.0, -2.0, 0.1);
        let snaps = vec![
            Snapshot {
                step: 0,
                time: 0.0,
                state: FieldCoeffs::constant(b.clone(), Vec3::Z),
            },
            Snapshot {
                step: 4,
                time: 0.25,
                state: u.clone(),
            },
        ];
        let bytes = encode_snapshots(3, &snaps);
        assert_eq!(&bytes[..8], b"SLLGSNAP");
        assert_eq!(bytes.len(), 24 + 2 * (16 + 72));
        let (n, back) = decode_snapshots(&bytes).unwrap();
        assert_eq!(n, 3);
        assert_eq!(back[1].step, 4);
        assert_eq!(back[1].time, 0.25);
        assert_eq!(back[1].coeffs[1], [1.0, -2.0, 0.1]);
        assert!(decode_snapshots(&bytes[..30]).is_err());
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(decode_snapshots(&corrupt).is_err());
    }

    #[test]
    fn checksum_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
