//! Python bindings: motor babbling, the mask-augmented dataset, and the
//! multimodal VAE with its downstream tasks (reconstruction, prediction,
//! rollout, imitation).

use mmvae_core::arm::{babble_rows, ArmConfig, ArmState, Normalization, RAW_DIMS};
use mmvae_core::dataset::{augment, make_samples, split, MaskPattern, SplitDataset};
use mmvae_core::io::{load_checkpoint, save_checkpoint, CheckpointMeta};
use mmvae_core::linalg::Matrix;
use mmvae_core::model::{LatentMode, MmVae, TrainConfig};
use mmvae_core::tasks;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::path::Path;

fn err(e: mmvae_core::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_to_vecs(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
        .collect()
}

fn row14(row: Vec<f64>) -> PyResult<[f64; RAW_DIMS]> {
    row.try_into()
        .map_err(|v: Vec<f64>| PyValueError::new_err(format!("expected 14 values, got {}", v.len())))
}

/// Raw babbling rows (14 columns each) for a given arm and seed.
#[pyfunction]
#[pyo3(signature = (rows, seed=7))]
fn babble(rows: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let trace = babble_rows(&ArmConfig::default(), rows, seed).map_err(err)?;
    Ok(trace.rows.iter().map(|r| r.to_array().to_vec()).collect())
}

/// A babbling trace turned into the mask-augmented train/test store.
#[pyclass]
struct Dataset {
    data: SplitDataset,
    normalization: Normalization,
    arm: ArmConfig,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (rows=7380, seed=7, split_ratio=0.8))]
    fn new(rows: usize, seed: u64, split_ratio: f64) -> PyResult<Self> {
        let arm = ArmConfig::default();
        let trace = babble_rows(&arm, rows, seed).map_err(err)?;
        let samples = make_samples(&trace).map_err(err)?;
        let data = split(augment(&samples).map_err(err)?, split_ratio, seed).map_err(err)?;
        Ok(Dataset {
            data,
            normalization: trace.normalization,
            arm,
        })
    }

    #[getter]
    fn train_rows(&self) -> usize {
        self.data.train_rows.len()
    }

    #[getter]
    fn test_rows(&self) -> usize {
        self.data.test_rows.len()
    }

    /// Normalize one raw 14-column row into model units.
    fn normalize_row(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        let raw = mmvae_core::arm::RawRow::from_array(&row14(row)?);
        Ok(self.normalization.normalize_row(&raw).to_vec())
    }

    /// Held-out (masked input, complete target) matrices for one pattern:
    /// "complete", "prev", "imitation" or "vision".
    fn test_matrices(&self, pattern: &str) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let pattern = MaskPattern::parse(pattern).map_err(err)?;
        let (x, y) = self.data.test_matrices(pattern).map_err(err)?;
        Ok((matrix_to_vecs(&x), matrix_to_vecs(&y)))
    }
}

/// The multimodal variational autoencoder.
#[pyclass(name = "MmVae")]
struct PyMmVae {
    model: MmVae,
}

#[pymethods]
impl PyMmVae {
    #[new]
    #[pyo3(signature = (seed=1))]
    fn new(seed: u64) -> Self {
        PyMmVae {
            model: MmVae::new(seed),
        }
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.store.flatten().len()
    }

    /// Denoising training on the augmented store; returns the loss history.
    #[pyo3(signature = (dataset, steps=40000, batch_size=128, learning_rate=1e-3, final_learning_rate=1e-4, beta=0.0, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        dataset: &Dataset,
        steps: usize,
        batch_size: usize,
        learning_rate: f64,
        final_learning_rate: f64,
        beta: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let config = TrainConfig {
            steps,
            batch_size,
            learning_rate,
            final_learning_rate,
            seed,
            beta,
            grad_clip: 10.0,
        };
        let history = self.model.train(&dataset.data, &config).map_err(err)?;
        Ok(history.iter().map(|r| r.total).collect())
    }

    /// Reconstruction means and variances for a batch of (possibly masked)
    /// 28-column samples.
    #[pyo3(signature = (rows, sample_seed=None))]
    fn reconstruct(
        &self,
        rows: Vec<Vec<f64>>,
        sample_seed: Option<u64>,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let x = Matrix::from_rows(&rows).map_err(err)?;
        let mode = match sample_seed {
            Some(seed) => LatentMode::Sampled { seed },
            None => LatentMode::Mean,
        };
        let out = self.model.reconstruct(&x, mode).map_err(err)?;
        Ok((matrix_to_vecs(&out.mean), matrix_to_vecs(&out.variance)))
    }

    /// Held-out reconstruction MSE% per modality under one mask pattern.
    fn evaluate(&self, dataset: &Dataset, pattern: &str) -> PyResult<Py<PyAny>> {
        let pattern = MaskPattern::parse(pattern).map_err(err)?;
        let report = tasks::eval_reconstruction(&self.model, &dataset.data, pattern).map_err(err)?;
        Python::attach(|py| {
            let d = pyo3::types::PyDict::new(py);
            for (m, score) in mmvae_core::model::MODALITIES.iter().zip(report.per_modality) {
                d.set_item(m.name, score)?;
            }
            d.set_item("overall", report.overall)?;
            Ok(d.into())
        })
    }

    /// One-step prediction from a normalized 14-column previous row:
    /// returns (mean, variance) over the current-time block.
    fn predict_next(&self, prev: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (mean, variance) = tasks::predict_next(&self.model, &row14(prev)?).map_err(err)?;
        Ok((mean.to_vec(), variance.to_vec()))
    }

    /// Iterated prediction: feed predicted means back for `horizon` steps.
    fn rollout(&self, start: Vec<f64>, horizon: usize) -> PyResult<Vec<Vec<f64>>> {
        let r = tasks::rollout(&self.model, &row14(start)?, horizon).map_err(err)?;
        Ok(r.means.iter().map(|m| m.to_vec()).collect())
    }

    /// Closed-loop imitation of a normalized vision reference, starting the
    /// plant at joint angles `start_q` (radians). Returns the tracking MSE%.
    fn imitate(
        &self,
        dataset: &Dataset,
        reference: Vec<Vec<f64>>,
        start_q: [f64; 4],
    ) -> PyResult<f64> {
        let reference: Vec<[f64; 4]> = reference
            .into_iter()
            .map(|r| {
                r.try_into().map_err(|v: Vec<f64>| {
                    PyValueError::new_err(format!("expected 4 vision values, got {}", v.len()))
                })
            })
            .collect::<PyResult<_>>()?;
        let start = ArmState::from_joints(start_q, &dataset.arm);
        let outcome = tasks::imitate(
            &self.model,
            &reference,
            &dataset.arm,
            &dataset.normalization,
            start,
        )
        .map_err(err)?;
        Ok(outcome.tracking_mse_percent)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let params = self.model.store.flatten();
        let meta = CheckpointMeta {
            kind: "mmvae".to_string(),
            init_seed: self.model.init_seed,
            config_hash: String::new(),
            sidecar: String::new(),
            param_count: params.len(),
        };
        save_checkpoint(Path::new(path), &meta, &params).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (meta, params) = load_checkpoint(Path::new(path)).map_err(err)?;
        if meta.kind != "mmvae" {
            return Err(PyValueError::new_err(format!(
                "checkpoint holds a {:?} model, expected mmvae",
                meta.kind
            )));
        }
        let mut model = MmVae::new(meta.init_seed);
        model.store.unflatten(&params).map_err(err)?;
        Ok(PyMmVae { model })
    }
}

#[pymodule]
fn mmvae_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(babble, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<PyMmVae>()?;
    m.add("MASK_VALUE", mmvae_core::dataset::MASK_VALUE)?;
    m.add("SAMPLE_DIMS", mmvae_core::dataset::SAMPLE_DIMS)?;
    Ok(())
}
