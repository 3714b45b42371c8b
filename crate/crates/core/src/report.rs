//! Serialization surfaces: CSV emitters for record batches, decay scans and
//! grids, and the seed/hash manifest pieces reports embed.

use crate::env::EnvironmentSpec;
use crate::error::Result;
use crate::estimators::DecayScan;
use crate::sde::{ExitFace, ExitRecord, GridSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;

/// Exit counts per face.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FaceCounts {
    pub front: u64,
    pub back: u64,
    pub lateral: u64,
    pub timeout: u64,
}

impl FaceCounts {
    pub fn from_records(records: &[ExitRecord]) -> Self {
        let mut c = FaceCounts::default();
        for r in records {
            match r.face {
                ExitFace::Front => c.front += 1,
                ExitFace::Back => c.back += 1,
                ExitFace::Lateral => c.lateral += 1,
                ExitFace::Timeout => c.timeout += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.front + self.back + self.lateral + self.timeout
    }
}

/// Short content hash of an environment spec (stable field order).
pub fn spec_hash(spec: &EnvironmentSpec) -> String {
    let json = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(json.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{}", &hex[..16])
}

/// Content hash of any serializable config.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// JSON summary of an exit-record batch.
#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub n: usize,
    pub face_counts: FaceCounts,
    pub mean_exit_time: f64,
    pub spec_hash: String,
    pub master_seed: u64,
}

impl BatchSummary {
    pub fn new(records: &[ExitRecord], spec: &EnvironmentSpec, master_seed: u64) -> Self {
        let mean_exit_time = if records.is_empty() {
            f64::NAN
        } else {
            records.iter().map(|r| r.time).sum::<f64>() / records.len() as f64
        };
        BatchSummary {
            n: records.len(),
            face_counts: FaceCounts::from_records(records),
            mean_exit_time,
            spec_hash: spec_hash(spec),
            master_seed,
        }
    }
}

/// Stream records as CSV: `env_seed,path_seed,face,exit_time,x_1..x_d`.
pub fn write_exit_records_csv<W: Write>(w: &mut W, records: &[ExitRecord], dim: usize) -> Result<()> {
    write!(w, "env_seed,path_seed,face,exit_time")?;
    for i in 1..=dim {
        write!(w, ",x_{i}")?;
    }
    writeln!(w)?;
    for r in records {
        write!(w, "{},{},{},{}", r.env_seed, r.path_seed, r.face.as_str(), r.time)?;
        for x in &r.position {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Decay scan CSV: `L,p_hat,ci_lo,ci_hi,n`.
pub fn write_decay_scan_csv<W: Write>(w: &mut W, scan: &DecayScan) -> Result<()> {
    writeln!(w, "L,p_hat,ci_lo,ci_hi,n")?;
    for row in &scan.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            row.scale, row.estimate.p_hat, row.estimate.ci.0, row.estimate.ci.1, row.estimate.n
        )?;
    }
    Ok(())
}

/// Grid CSV: `cell_index,c_1..c_d,value`.
pub fn write_grid_csv<W: Write>(w: &mut W, grid: &GridSpec, values: &[f64]) -> Result<()> {
    write!(w, "cell_index")?;
    for i in 1..=grid.dim() {
        write!(w, ",c_{i}")?;
    }
    writeln!(w, ",value")?;
    for (flat, v) in values.iter().enumerate() {
        write!(w, "{flat}")?;
        for c in grid.center_of(flat) {
            write!(w, ",{c}")?;
        }
        writeln!(w, ",{v}")?;
    }
    Ok(())
}

/// Two-column CSV table, for dumping `u(r)` or `s(r)`.
pub fn write_table_csv<W: Write>(
    w: &mut W,
    header: (&str, &str),
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    writeln!(w, "{},{}", header.0, header.1)?;
    for (x, y) in rows {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}
