//! Run artifacts: trajectory/mean/kernel CSV files and the JSON manifest.
//! Complex values always appear as paired `_re`/`_im` columns; floats are
//! written with full precision so identical runs are byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::algebra::min_eigenvalue;
use crate::engines::{KernelEvaluation, McResult, TrajectoryRecord};
use crate::error::Result;
use crate::harness::Tolerances;

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// One trajectory: time, integrated record, the conditional principal state
/// (row-major, re/im pairs), its trace before renormalization, and its
/// smallest eigenvalue.
pub fn write_trajectory_csv(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n_s = record.principal.first().map(|m| m.nrows()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "y_q".to_string()];
    for i in 0..n_s {
        for j in 0..n_s {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    header.push("trace".into());
    header.push("min_eig".into());
    writeln!(f, "{}", header.join(","))?;
    for (idx, t) in record.times.iter().enumerate() {
        let rho = &record.principal[idx];
        let mut row = vec![fmt(*t), fmt(record.record_y[idx])];
        for i in 0..n_s {
            for j in 0..n_s {
                row.push(fmt(rho[(i, j)].re));
                row.push(fmt(rho[(i, j)].im));
            }
        }
        row.push(fmt(record.traces[idx]));
        row.push(fmt(min_eigenvalue(rho)));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Monte Carlo output: time, mean principal state, aggregate standard error.
pub fn write_mean_csv(res: &McResult, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n_s = res.mean_principal.first().map(|m| m.nrows()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for i in 0..n_s {
        for j in 0..n_s {
            header.push(format!("mean_rho_{i}_{j}_re"));
            header.push(format!("mean_rho_{i}_{j}_im"));
        }
    }
    header.push("se".into());
    writeln!(f, "{}", header.join(","))?;
    for (idx, t) in res.times.iter().enumerate() {
        let rho = &res.mean_principal[idx];
        let mut row = vec![fmt(*t)];
        for i in 0..n_s {
            for j in 0..n_s {
                row.push(fmt(rho[(i, j)].re));
                row.push(fmt(rho[(i, j)].im));
            }
        }
        row.push(fmt(res.se[idx]));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Kernel evaluations: one row per (t, t') pair, matrix flattened row-major.
pub fn write_kernel_csv(eval: &KernelEvaluation, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let dim = eval.mats.first().map(|m| m.nrows()).unwrap_or(0);
    let mut header = vec!["t".to_string(), "t_prime".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("k_{i}_{j}_re"));
            header.push(format!("k_{i}_{j}_im"));
        }
    }
    writeln!(f, "{}", header.join(","))?;
    for ((t, tp), m) in eval.pairs.iter().zip(&eval.mats) {
        let mut row = vec![fmt(*t), fmt(*tp)];
        for i in 0..dim {
            for j in 0..dim {
                row.push(fmt(m[(i, j)].re));
                row.push(fmt(m[(i, j)].im));
            }
        }
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Everything that influenced a run, for reproduction from the manifest
/// alone.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub model_file: Option<String>,
    pub engine: String,
    pub t0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Per-trajectory seeds derived from the master seed.
    pub trajectory_seeds: Vec<u64>,
    pub generator: String,
    pub projector: Option<String>,
    pub memory_window: Option<f64>,
    pub renorm: bool,
    pub workers: Option<usize>,
    pub fault: Option<String>,
    pub tolerances: Tolerances,
    pub outputs: Vec<String>,
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| crate::error::Error::Parse(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// FNV-1a over the canonical byte representation of a config.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
