//! File formats: trace CSV, "MMV1" binary matrices, JSON normalization
//! sidecars, "MMVC" checkpoints, loss-history CSV and report JSON.
//!
//! Every CSV artifact carries the producing config hash in a leading
//! `# config_hash=...` comment line so downstream commands can refuse to
//! mix artifacts from different runs.

use crate::arm::{Normalization, RawRow, RAW_DIMS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::LossRecord;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Column names of one raw (unnormalized) trace row.
pub const RAW_HEADER: [&str; RAW_DIMS] = [
    "q1", "q2", "q3", "q4", "vl_x", "vl_y", "vr_x", "vr_y", "p", "s", "u1", "u2", "u3", "u4",
];

const MATRIX_MAGIC: &[u8; 4] = b"MMV1";
const CHECKPOINT_MAGIC: &[u8; 4] = b"MMVC";
const CHECKPOINT_VERSION: u32 = 1;

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

// --- CSV helpers ---------------------------------------------------------

fn write_hash_comment(w: &mut impl Write, config_hash: &str) -> std::io::Result<()> {
    writeln!(w, "# config_hash={}", config_hash)
}

/// Split a CSV file into its `# key=value` comments and data lines.
fn read_csv_lines(path: &Path) -> Result<(Vec<(String, String)>, Vec<String>)> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut comments = Vec::new();
    let mut lines = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| format_err(path, e.to_string()))?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                comments.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    Ok((comments, lines))
}

/// The `config_hash` comment of a CSV artifact, if present.
pub fn csv_config_hash(path: &Path) -> Result<Option<String>> {
    let (comments, _) = read_csv_lines(path)?;
    Ok(comments.into_iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v))
}

fn parse_fields(path: &Path, line: &str, expected: usize) -> Result<Vec<f64>> {
    let fields: Vec<f64> = line
        .split(',')
        .map(|f| f.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_err(path, format!("bad number in {:?}: {}", line, e)))?;
    if fields.len() != expected {
        return Err(format_err(
            path,
            format!("expected {} fields, got {}", expected, fields.len()),
        ));
    }
    Ok(fields)
}

// --- trace CSV -----------------------------------------------------------

pub fn write_trace_csv(path: &Path, rows: &[RawRow], config_hash: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        write_hash_comment(&mut w, config_hash)?;
        writeln!(w, "{}", RAW_HEADER.join(","))?;
        for row in rows {
            let a = row.to_array();
            let line: Vec<String> = a.iter().map(|v| format!("{:.17e}", v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_trace_csv(path: &Path) -> Result<(Vec<RawRow>, Option<String>)> {
    let (comments, lines) = read_csv_lines(path)?;
    let hash = comments.into_iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v);
    let mut rows = Vec::new();
    for line in &lines {
        if line.starts_with(RAW_HEADER[0]) {
            continue; // header
        }
        let fields = parse_fields(path, line, RAW_DIMS)?;
        let mut a = [0.0; RAW_DIMS];
        a.copy_from_slice(&fields);
        rows.push(RawRow::from_array(&a));
    }
    Ok((rows, hash))
}

// --- MMV1 binary matrices ------------------------------------------------

pub fn write_matrix_binary(path: &Path, m: &Matrix) -> Result<()> {
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for &v in m.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_matrix_binary(path: &Path) -> Result<Matrix> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| format_err(path, e.to_string()))?;
    if &magic != MATRIX_MAGIC {
        return Err(format_err(path, "bad magic, not an MMV1 matrix file"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|e| format_err(path, e.to_string()))?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8).map_err(|e| format_err(path, e.to_string()))?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut b8)
            .map_err(|e| format_err(path, "truncated data section".to_string() + ": " + &e.to_string()))?;
        data.push(f64::from_le_bytes(b8));
    }
    Matrix::from_vec(rows, cols, data)
}

// --- JSON sidecars and reports -------------------------------------------

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| format_err(path, e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| format_err(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Normalization sidecar with the producing config hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSidecar {
    pub config_hash: String,
    pub normalization: Normalization,
}

pub fn write_normalization_sidecar(
    path: &Path,
    normalization: &Normalization,
    config_hash: &str,
) -> Result<()> {
    write_json(
        path,
        &NormalizationSidecar {
            config_hash: config_hash.to_string(),
            normalization: normalization.clone(),
        },
    )
}

pub fn read_normalization_sidecar(path: &Path) -> Result<NormalizationSidecar> {
    read_json(path)
}

// --- dataset export ------------------------------------------------------

/// Augmented dataset as CSV: the 28 normalized/masked input dims plus a
/// trailing pattern-id column.
pub fn write_dataset_csv(
    path: &Path,
    inputs: &Matrix,
    pattern_ids: &[u8],
    config_hash: &str,
) -> Result<()> {
    if inputs.rows() != pattern_ids.len() {
        return Err(Error::Shape(format!(
            "{} input rows vs {} pattern ids",
            inputs.rows(),
            pattern_ids.len()
        )));
    }
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        write_hash_comment(&mut w, config_hash)?;
        let mut header: Vec<String> = (0..inputs.cols()).map(|c| format!("x{}", c)).collect();
        header.push("pattern".into());
        writeln!(w, "{}", header.join(","))?;
        for r in 0..inputs.rows() {
            let mut fields: Vec<String> =
                inputs.row(r).iter().map(|v| format!("{:.17e}", v)).collect();
            fields.push(pattern_ids[r].to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_dataset_csv(path: &Path) -> Result<(Matrix, Vec<u8>, Option<String>)> {
    let (comments, lines) = read_csv_lines(path)?;
    let hash = comments.into_iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v);
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for line in &lines {
        if line.starts_with("x0") {
            continue;
        }
        let fields = parse_fields(path, line, crate::dataset::SAMPLE_DIMS + 1)?;
        let (data, id) = fields.split_at(crate::dataset::SAMPLE_DIMS);
        rows.push(data.to_vec());
        ids.push(id[0] as u8);
    }
    let m = Matrix::from_rows(&rows)?;
    Ok((m, ids, hash))
}

// --- MMVC checkpoints ----------------------------------------------------

/// Everything about a checkpoint except the parameter values themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Which model the blob belongs to: "mmvae", "vanilla", "vanilla-aug",
    /// "forward", "inverse".
    pub kind: String,
    /// Seed the parameter store was initialized from; the loader rebuilds
    /// the architecture and overwrites the values.
    pub init_seed: u64,
    pub config_hash: String,
    /// Path of the normalization sidecar this model was trained against.
    pub sidecar: String,
    pub param_count: usize,
}

pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, params: &[f64]) -> Result<()> {
    if meta.param_count != params.len() {
        return Err(Error::Contract(format!(
            "metadata says {} parameters, blob has {}",
            meta.param_count,
            params.len()
        )));
    }
    let json = serde_json::to_vec(meta)?;
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        w.write_all(&(params.len() as u64).to_le_bytes())?;
        for &v in params {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<f64>)> {
    let file = File::open(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| format_err(path, e.to_string()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(format_err(path, "bad magic, not an MMVC checkpoint"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|e| format_err(path, e.to_string()))?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(format_err(
            path,
            format!("checkpoint version {} unsupported (expected {})", version, CHECKPOINT_VERSION),
        ));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|e| format_err(path, e.to_string()))?;
    let json_len = u64::from_le_bytes(b8) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)
        .map_err(|e| format_err(path, e.to_string()))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(&json).map_err(|e| format_err(path, e.to_string()))?;
    r.read_exact(&mut b8).map_err(|e| format_err(path, e.to_string()))?;
    let n = u64::from_le_bytes(b8) as usize;
    if n != meta.param_count {
        return Err(format_err(
            path,
            format!("blob length {} disagrees with metadata {}", n, meta.param_count),
        ));
    }
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8)
            .map_err(|_| format_err(path, "truncated parameter blob"))?;
        params.push(f64::from_le_bytes(b8));
    }
    Ok((meta, params))
}

// --- loss history --------------------------------------------------------

pub fn write_loss_csv(path: &Path, history: &[LossRecord], config_hash: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        write_hash_comment(&mut w, config_hash)?;
        writeln!(w, "step,total,nll_q,nll_v,nll_p,nll_s,nll_u,kl")?;
        for rec in history {
            let m = rec.per_modality;
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                rec.step, rec.total, m[0], m[1], m[2], m[3], m[4], rec.kl
            )?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}

pub fn read_loss_csv(path: &Path) -> Result<(Vec<LossRecord>, Option<String>)> {
    let (comments, lines) = read_csv_lines(path)?;
    let hash = comments.into_iter().find(|(k, _)| k == "config_hash").map(|(_, v)| v);
    let mut out = Vec::new();
    for line in &lines {
        if line.starts_with("step") {
            continue;
        }
        let f = parse_fields(path, line, 8)?;
        out.push(LossRecord {
            step: f[0] as usize,
            total: f[1],
            per_modality: [f[2], f[3], f[4], f[5], f[6]],
            kl: f[7],
        });
    }
    Ok((out, hash))
}

// --- trajectory dumps ----------------------------------------------------

/// Reference-vs-executed vision trajectories, one row per control step:
/// step, reference left/right camera x/y, executed left/right camera x/y
/// (normalized coordinates).
pub fn write_trajectory_csv(
    path: &Path,
    reference: &Matrix,
    executed: &Matrix,
    config_hash: &str,
) -> Result<()> {
    if reference.shape() != executed.shape() || reference.cols() != 4 {
        return Err(Error::Shape(format!(
            "trajectories must both be n x 4, got {:?} vs {:?}",
            reference.shape(),
            executed.shape()
        )));
    }
    let file = File::create(path).map_err(|e| format_err(path, e.to_string()))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        write_hash_comment(&mut w, config_hash)?;
        writeln!(w, "step,ref_vl_x,ref_vl_y,ref_vr_x,ref_vr_y,exe_vl_x,exe_vl_y,exe_vr_x,exe_vr_y")?;
        for r in 0..reference.rows() {
            let rr = reference.row(r);
            let er = executed.row(r);
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r, rr[0], rr[1], rr[2], rr[3], er[0], er[1], er[2], er[3]
            )?;
        }
        w.flush()
    })()
    .map_err(|e| format_err(path, e.to_string()))
}
