//! The three capabilities on top of a trained model: missing-modality
//! reconstruction scoring, iterated prediction, and the closed-loop
//! imitation controller; plus the shared MSE% metric.

use crate::arm::{ik_oracle_step, step, ArmConfig, ArmState, Normalization, RAW_DIMS};
use crate::dataset::{MaskPattern, SplitDataset, MASK_VALUE, SAMPLE_DIMS, TM1_BLOCK, T_BLOCK};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{LatentMode, MmVae, MODALITIES};
use serde::{Deserialize, Serialize};

/// Predicted means may drift this far past the data range during chained
/// prediction before the rollout is declared divergent.
pub const ROLLOUT_BOUND: f64 = 1.5;

/// Consecutive saturated commands tolerated before the imitation report
/// carries a warning.
pub const SATURATION_WARN_STEPS: usize = 10;

/// 100 x mean squared error over the selected columns, in normalized
/// [-1, 1] coordinates.
pub fn mse_percent(pred: &Matrix, target: &Matrix, cols: &[usize]) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if cols.is_empty() || pred.rows() == 0 {
        return Err(Error::Input("empty selection for mse_percent".into()));
    }
    if let Some(&c) = cols.iter().find(|&&c| c >= pred.cols()) {
        return Err(Error::Input(format!(
            "column {} out of range for {} columns",
            c,
            pred.cols()
        )));
    }
    let mut se = 0.0;
    for r in 0..pred.rows() {
        for &c in cols {
            let d = pred.get(r, c) - target.get(r, c);
            se += d * d;
        }
    }
    Ok(100.0 * se / (pred.rows() * cols.len()) as f64)
}

/// Per-modality and overall MSE% for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// MSE% in canonical modality order (proprioception, vision, touch,
    /// sound, motor).
    pub per_modality: [f64; 5],
    pub overall: f64,
    pub rows: usize,
}

impl MetricReport {
    pub fn from_matrices(pred: &Matrix, target: &Matrix) -> Result<MetricReport> {
        let all: Vec<usize> = (0..target.cols()).collect();
        let mut per_modality = [0.0; 5];
        for (i, spec) in MODALITIES.iter().enumerate() {
            let cols: Vec<usize> = spec.cols().collect();
            per_modality[i] = mse_percent(pred, target, &cols)?;
        }
        Ok(MetricReport {
            per_modality,
            overall: mse_percent(pred, target, &all)?,
            rows: target.rows(),
        })
    }

    pub fn modality(&self, name: &str) -> Option<f64> {
        MODALITIES
            .iter()
            .position(|m| m.name == name)
            .map(|i| self.per_modality[i])
    }
}

/// Reconstruct every held-out row under `pattern` and score the means
/// against the complete targets.
pub fn eval_reconstruction(
    model: &MmVae,
    data: &SplitDataset,
    pattern: MaskPattern,
) -> Result<MetricReport> {
    let (inputs, targets) = data.test_matrices(pattern)?;
    if inputs.rows() == 0 {
        return Err(Error::Input("empty test set".into()));
    }
    let out = model.reconstruct(&inputs, LatentMode::Mean)?;
    MetricReport::from_matrices(&out.mean, &targets)
}

/// Single-step prediction: place `prev` in the t-1 slots, mask the t slots
/// (the PREV_ONLY footprint), reconstruct, and return the t-block mean and
/// variance in raw 14-dim order (q, v, p, s, u).
pub fn predict_next(model: &MmVae, prev: &[f64; RAW_DIMS]) -> Result<([f64; RAW_DIMS], [f64; RAW_DIMS])> {
    let mut sample = [MASK_VALUE; SAMPLE_DIMS];
    for (d, &col) in TM1_BLOCK.iter().enumerate() {
        sample[col] = prev[d];
    }
    let x = Matrix::from_rows(&[sample.to_vec()])?;
    let out = model.reconstruct(&x, LatentMode::Mean)?;
    let mut mean = [0.0; RAW_DIMS];
    let mut variance = [0.0; RAW_DIMS];
    for (d, &col) in T_BLOCK.iter().enumerate() {
        mean[d] = out.mean.get(0, col);
        variance[d] = out.variance.get(0, col);
    }
    Ok((mean, variance))
}

/// A chained multi-step prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub horizon: usize,
    /// t-1 block fed at each step; `inputs[k+1]` equals `means[k]` exactly.
    pub inputs: Vec<[f64; RAW_DIMS]>,
    pub means: Vec<[f64; RAW_DIMS]>,
    pub variances: Vec<[f64; RAW_DIMS]>,
}

/// Iterate [`predict_next`], feeding each predicted mean back as the next
/// t-1 observation.
pub fn rollout(model: &MmVae, initial: &[f64; RAW_DIMS], horizon: usize) -> Result<Rollout> {
    if horizon < 1 {
        return Err(Error::Input("rollout horizon must be at least 1".into()));
    }
    let mut inputs = Vec::with_capacity(horizon);
    let mut means = Vec::with_capacity(horizon);
    let mut variances = Vec::with_capacity(horizon);
    let mut prev = *initial;
    for step in 0..horizon {
        let (mean, variance) = predict_next(model, &prev)?;
        if mean.iter().any(|v| !v.is_finite() || v.abs() > ROLLOUT_BOUND) {
            return Err(Error::Rollout { step });
        }
        inputs.push(prev);
        means.push(mean);
        variances.push(variance);
        prev = mean;
    }
    Ok(Rollout {
        horizon,
        inputs,
        means,
        variances,
    })
}

/// One step's feedback record: what the controller put into the sample vs
/// what the plant actually measured at that moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackAudit {
    pub fed_q_prev: [f64; 4],
    pub fed_v_prev: [f64; 4],
    pub plant_q: [f64; 4],
    pub plant_v: [f64; 4],
}

/// Result of one closed-loop imitation run. Trajectories are normalized
/// vision coordinates, one row per control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImitationOutcome {
    /// Tracking MSE% of executed vision vs the reference.
    pub tracking_mse_percent: f64,
    pub reference: Matrix,
    pub executed: Matrix,
    pub commands: Vec<[f64; 4]>,
    pub audit: Vec<FeedbackAudit>,
    /// Set when more than [`SATURATION_WARN_STEPS`] consecutive commands
    /// hit the actuator limit.
    pub saturation_warning: bool,
}

fn vision_cols() -> Vec<usize> {
    (0..4).collect()
}

/// Closed-loop imitation: for each reference waypoint, build a sample with
/// v_t = reference, v_{t-1} and q_{t-1} = the plant's measured state, all
/// else masked; reconstruct; issue the u_t mean to the plant.
pub fn imitate(
    model: &MmVae,
    reference: &[[f64; 4]],
    config: &ArmConfig,
    normalization: &Normalization,
    start: ArmState,
) -> Result<ImitationOutcome> {
    if reference.is_empty() {
        return Err(Error::Input("empty imitation reference".into()));
    }
    let mut state = start;
    let mut executed = Vec::with_capacity(reference.len());
    let mut commands = Vec::with_capacity(reference.len());
    let mut audit = Vec::with_capacity(reference.len());
    let mut consecutive_saturated = 0usize;
    let mut saturation_warning = false;
    let cap = config.babble_amp_max;
    for target_v in reference {
        let q_prev = normalization.normalize_joints(state.q);
        let v_prev = normalization.normalize_vision(state.v);
        audit.push(FeedbackAudit {
            fed_q_prev: q_prev,
            fed_v_prev: v_prev,
            plant_q: normalization.normalize_joints(state.q),
            plant_v: normalization.normalize_vision(state.v),
        });
        let mut sample = [MASK_VALUE; SAMPLE_DIMS];
        sample[4..8].copy_from_slice(&q_prev);
        sample[8..12].copy_from_slice(target_v);
        sample[12..16].copy_from_slice(&v_prev);
        // a drifting plant can leave the normalization range; the model only
        // accepts (and was only trained on) values near [-1, 1]
        for v in &mut sample[4..16] {
            *v = v.clamp(-ROLLOUT_BOUND, ROLLOUT_BOUND);
        }
        let x = Matrix::from_rows(&[sample.to_vec()])?;
        let out = model.reconstruct(&x, LatentMode::Mean)?;
        let u_norm: [f64; 4] = std::array::from_fn(|j| out.mean.get(0, 20 + j));
        let u_raw = normalization.denormalize_motor(u_norm);
        let mut u = [0.0; 4];
        let mut saturated = false;
        for j in 0..4 {
            if !u_raw[j].is_finite() {
                return Err(Error::Rollout { step: commands.len() });
            }
            if u_raw[j].abs() > cap {
                saturated = true;
            }
            u[j] = u_raw[j].clamp(-cap, cap);
        }
        consecutive_saturated = if saturated { consecutive_saturated + 1 } else { 0 };
        if consecutive_saturated > SATURATION_WARN_STEPS {
            saturation_warning = true;
        }
        state = step(&state, u, config);
        commands.push(u);
        executed.push(normalization.normalize_vision(state.v).to_vec());
    }
    let reference_m = Matrix::from_rows(&reference.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    let executed_m = Matrix::from_rows(&executed)?;
    Ok(ImitationOutcome {
        tracking_mse_percent: mse_percent(&executed_m, &reference_m, &vision_cols())?,
        reference: reference_m,
        executed: executed_m,
        commands,
        audit,
        saturation_warning,
    })
}

/// The analytic damped-least-squares controller run over the same
/// normalized references, for comparison against the learned loop.
pub fn oracle_imitate(
    reference: &[[f64; 4]],
    config: &ArmConfig,
    normalization: &Normalization,
    start: ArmState,
) -> Result<ImitationOutcome> {
    if reference.is_empty() {
        return Err(Error::Input("empty imitation reference".into()));
    }
    let mut state = start;
    let mut executed = Vec::with_capacity(reference.len());
    let mut commands = Vec::with_capacity(reference.len());
    let mut consecutive_saturated = 0usize;
    let mut saturation_warning = false;
    for target_v in reference {
        let raw_v = normalization.denormalize_vision(*target_v);
        let (u, saturated) = ik_oracle_step(state.q, raw_v, config);
        consecutive_saturated = if saturated { consecutive_saturated + 1 } else { 0 };
        if consecutive_saturated > SATURATION_WARN_STEPS {
            saturation_warning = true;
        }
        state = step(&state, u, config);
        commands.push(u);
        executed.push(normalization.normalize_vision(state.v).to_vec());
    }
    let reference_m = Matrix::from_rows(&reference.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    let executed_m = Matrix::from_rows(&executed)?;
    Ok(ImitationOutcome {
        tracking_mse_percent: mse_percent(&executed_m, &reference_m, &vision_cols())?,
        reference: reference_m,
        executed: executed_m,
        commands,
        audit: Vec::new(),
        saturation_warning,
    })
}
