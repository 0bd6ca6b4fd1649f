//! The multimodal variational autoencoder and its training loop.
//!
//! Five unimodal encoders feed a shared encoder producing a 28-dim Gaussian
//! latent; a shared decoder fans back out through five unimodal decoders,
//! each emitting a per-dimension mean and variance. Training minimizes the
//! dimensionality-weighted Gaussian reconstruction NLL of the complete
//! target given a (possibly masked) input, plus an optional KL term.

use crate::autodiff::{NodeId, Tape};
use crate::dataset::{SplitDataset, MASK_VALUE, SAMPLE_DIMS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, AdamState, DenseLayer, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub const LATENT_DIM: usize = 28;
/// Latent log-variance is clamped to this interval before exponentiation.
pub const LOG_VAR_CLAMP: (f64, f64) = (-10.0, 10.0);
/// Floor added to every softplus variance head. The floor bounds the 1/sigma^2
/// factor in the NLL gradient: the discrete modalities (touch, sound) are
/// piecewise constant, so their variance collapses onto the floor, and a
/// boundary sample then produces a gradient spike proportional to the floor's
/// reciprocal. 1e-3 keeps those spikes inside what the global clip absorbs.
pub const VAR_FLOOR: f64 = 1e-3;
/// Output variances are capped here; the data lives in [-1, 1], so unit
/// variance already means "know nothing", and an uncapped variance head
/// can starve a hard modality of mean gradient early in training.
pub const VAR_CEIL: f64 = 1.0;

/// One sensory modality: its slice of the 28-dim sample (covering both the
/// t and t-1 slots), its loss weight 1/D, and its sub-network widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: &'static str,
    pub dim: usize,
    pub col_start: usize,
    pub encoder_widths: [usize; 2],
    pub decoder_hidden: usize,
}

impl ModalitySpec {
    pub fn lambda(&self) -> f64 {
        1.0 / self.dim as f64
    }

    pub fn cols(&self) -> std::ops::Range<usize> {
        self.col_start..self.col_start + self.dim
    }
}

/// Canonical modality order; column spans tile the 28-dim sample exactly.
pub const MODALITIES: [ModalitySpec; 5] = [
    ModalitySpec {
        name: "proprioception",
        dim: 8,
        col_start: 0,
        encoder_widths: [40, 20],
        decoder_hidden: 40,
    },
    ModalitySpec {
        name: "vision",
        dim: 8,
        col_start: 8,
        encoder_widths: [40, 20],
        decoder_hidden: 40,
    },
    ModalitySpec {
        name: "touch",
        dim: 2,
        col_start: 16,
        encoder_widths: [10, 5],
        decoder_hidden: 10,
    },
    ModalitySpec {
        name: "sound",
        dim: 2,
        col_start: 18,
        encoder_widths: [10, 5],
        decoder_hidden: 10,
    },
    ModalitySpec {
        name: "motor",
        dim: 8,
        col_start: 20,
        encoder_widths: [40, 20],
        decoder_hidden: 40,
    },
];

/// Width of the concatenated unimodal encoder outputs / shared decoder
/// output (20+20+5+5+20).
pub const FUSED_DIM: usize = 70;

/// Per-dimension reconstruction mean and variance for a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBatchOutput {
    pub mean: Matrix,
    pub variance: Matrix,
}

/// Whether inference uses the latent mean or a reparameterized sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentMode {
    Mean,
    Sampled { seed: u64 },
}

struct ModalityNets {
    encoder: [DenseLayer; 2],
    decoder_hidden: DenseLayer,
    mean_head: DenseLayer,
    var_head: DenseLayer,
}

pub struct MmVae {
    pub store: ParamStore,
    modalities: Vec<ModalityNets>,
    shared_encoder: DenseLayer,
    latent_mean_head: DenseLayer,
    latent_lv_head: DenseLayer,
    shared_decoder: [DenseLayer; 2],
    pub init_seed: u64,
}

/// Forward-pass node handles, kept so losses and probes can reuse one tape.
pub struct ForwardNodes {
    pub latent_mean: NodeId,
    pub latent_log_var: NodeId,
    pub latent: NodeId,
    pub out_mean: NodeId,
    pub out_variance: NodeId,
    /// Per-modality (mean, variance) nodes in canonical order.
    pub per_modality: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Cosine-annealed endpoint; set equal to `learning_rate` for a
    /// constant schedule.
    pub final_learning_rate: f64,
    pub seed: u64,
    pub beta: f64,
    /// Global gradient-norm cap; the NLL's 1/sigma^2 terms occasionally
    /// spike once variances get small, and an uncapped spike can derail a
    /// long run.
    pub grad_clip: f64,
}

impl TrainConfig {
    /// Desk-scale profile: small enough to train on one CPU core in
    /// minutes while reproducing the qualitative results.
    pub fn desk(seed: u64) -> Self {
        TrainConfig {
            steps: 40_000,
            batch_size: 128,
            learning_rate: 1e-3,
            final_learning_rate: 1e-4,
            seed,
            beta: 0.0,
            grad_clip: 10.0,
        }
    }

    /// The original large-scale profile (80k steps, batch 1000, lr 5e-5).
    pub fn paper_scale(seed: u64) -> Self {
        TrainConfig {
            steps: 80_000,
            batch_size: 1000,
            learning_rate: 5e-5,
            final_learning_rate: 5e-5,
            seed,
            beta: 0.0,
            grad_clip: 10.0,
        }
    }

    /// Cosine anneal from `learning_rate` down to `final_learning_rate`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.steps <= 1 || self.final_learning_rate == self.learning_rate {
            return self.learning_rate;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.final_learning_rate
            + 0.5 * (self.learning_rate - self.final_learning_rate)
                * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

/// One loss-history row written to the loss CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    /// λ-weighted NLL per modality, canonical order.
    pub per_modality: [f64; 5],
    pub kl: f64,
}

impl MmVae {
    pub fn new(seed: u64) -> MmVae {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let modalities = MODALITIES
            .iter()
            .map(|m| {
                let e0 = DenseLayer::new(&mut store, m.dim, m.encoder_widths[0], Activation::Relu, &mut rng);
                let e1 = DenseLayer::new(
                    &mut store,
                    m.encoder_widths[0],
                    m.encoder_widths[1],
                    Activation::Relu,
                    &mut rng,
                );
                let dh = DenseLayer::new(
                    &mut store,
                    m.encoder_widths[1],
                    m.decoder_hidden,
                    Activation::Relu,
                    &mut rng,
                );
                // linear mean and softplus variance heads instead of the
                // nominal ReLU pair: the data lives in [-1, 1]
                let mean_head =
                    DenseLayer::new(&mut store, m.decoder_hidden, m.dim, Activation::Linear, &mut rng);
                let var_head =
                    DenseLayer::new(&mut store, m.decoder_hidden, m.dim, Activation::Softplus, &mut rng);
                ModalityNets {
                    encoder: [e0, e1],
                    decoder_hidden: dh,
                    mean_head,
                    var_head,
                }
            })
            .collect();
        let shared_encoder =
            DenseLayer::new(&mut store, FUSED_DIM, 100, Activation::Relu, &mut rng);
        let latent_mean_head =
            DenseLayer::new(&mut store, 100, LATENT_DIM, Activation::Linear, &mut rng);
        let latent_lv_head =
            DenseLayer::new(&mut store, 100, LATENT_DIM, Activation::Linear, &mut rng);
        let shared_decoder = [
            DenseLayer::new(&mut store, LATENT_DIM, 100, Activation::Relu, &mut rng),
            DenseLayer::new(&mut store, 100, FUSED_DIM, Activation::Relu, &mut rng),
        ];
        MmVae {
            store,
            modalities,
            shared_encoder,
            latent_mean_head,
            latent_lv_head,
            shared_decoder,
            init_seed: seed,
        }
    }

    fn check_input(x: &Matrix) -> Result<()> {
        if x.cols() != SAMPLE_DIMS {
            return Err(Error::Shape(format!(
                "expected {} input columns, got {}",
                SAMPLE_DIMS,
                x.cols()
            )));
        }
        // the slack band past [-1,1] admits chained predictions that have
        // drifted slightly out of the data range
        if x.data()
            .iter()
            .any(|&v| !(v == MASK_VALUE || (-1.5..=1.5).contains(&v)))
        {
            return Err(Error::Contract(
                "input entries must lie in [-1.5,1.5] or be the mask value -2".into(),
            ));
        }
        Ok(())
    }

    /// Encoder half on the tape: returns (latent mean, clamped log-var).
    pub fn encode_nodes(&self, tape: &mut Tape, x: NodeId) -> Result<(NodeId, NodeId)> {
        let mut encoded = Vec::with_capacity(5);
        for (spec, nets) in MODALITIES.iter().zip(&self.modalities) {
            let slice = tape.slice_cols(x, spec.cols().start, spec.cols().end)?;
            let h = nets.encoder[0].forward(tape, &self.store, slice)?;
            let h = nets.encoder[1].forward(tape, &self.store, h)?;
            encoded.push(h);
        }
        let fused = tape.concat_cols(&encoded)?;
        let shared = self.shared_encoder.forward(tape, &self.store, fused)?;
        let mean = self.latent_mean_head.forward(tape, &self.store, shared)?;
        let lv = self.latent_lv_head.forward(tape, &self.store, shared)?;
        let lv = tape.clamp(lv, LOG_VAR_CLAMP.0, LOG_VAR_CLAMP.1);
        Ok((mean, lv))
    }

    /// Decoder half on the tape: returns combined and per-modality
    /// (mean, variance) nodes, canonical column order.
    pub fn decode_nodes(
        &self,
        tape: &mut Tape,
        z: NodeId,
    ) -> Result<(NodeId, NodeId, Vec<(NodeId, NodeId)>)> {
        let h = self.shared_decoder[0].forward(tape, &self.store, z)?;
        let h = self.shared_decoder[1].forward(tape, &self.store, h)?;
        let mut at = 0;
        let mut means = Vec::with_capacity(5);
        let mut vars = Vec::with_capacity(5);
        for (spec, nets) in MODALITIES.iter().zip(&self.modalities) {
            let w = spec.encoder_widths[1];
            let slice = tape.slice_cols(h, at, at + w)?;
            at += w;
            let dh = nets.decoder_hidden.forward(tape, &self.store, slice)?;
            let mean = nets.mean_head.forward(tape, &self.store, dh)?;
            let var = nets.var_head.forward(tape, &self.store, dh)?;
            let var = tape.add_scalar(var, VAR_FLOOR);
            let var = tape.clamp(var, VAR_FLOOR, VAR_CEIL);
            means.push(mean);
            vars.push(var);
        }
        let out_mean = tape.concat_cols(&means)?;
        let out_variance = tape.concat_cols(&vars)?;
        let per_modality = means.into_iter().zip(vars).collect();
        Ok((out_mean, out_variance, per_modality))
    }

    /// Full forward pass for a batch.
    pub fn forward_nodes(
        &self,
        tape: &mut Tape,
        x: &Matrix,
        mode: LatentMode,
    ) -> Result<ForwardNodes> {
        Self::check_input(x)?;
        let input = tape.leaf(x.clone());
        let (latent_mean, latent_log_var) = self.encode_nodes(tape, input)?;
        let latent = match mode {
            LatentMode::Mean => latent_mean,
            LatentMode::Sampled { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let noise = sample_normal(x.rows(), LATENT_DIM, &mut rng);
                tape.reparameterize(latent_mean, latent_log_var, noise)?
            }
        };
        let (out_mean, out_variance, per_modality) = self.decode_nodes(tape, latent)?;
        Ok(ForwardNodes {
            latent_mean,
            latent_log_var,
            latent,
            out_mean,
            out_variance,
            per_modality,
        })
    }

    /// Latent Gaussian parameters for a batch of (possibly masked) samples.
    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        Self::check_input(x)?;
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let (mean, lv) = self.encode_nodes(&mut tape, input)?;
        Ok((tape.value(mean).clone(), tape.value(lv).clone()))
    }

    /// Reconstruction distribution for a batch of latent codes.
    pub fn decode(&self, z: &Matrix) -> Result<GaussianBatchOutput> {
        if z.cols() != LATENT_DIM {
            return Err(Error::Shape(format!(
                "latent must have {} columns, got {}",
                LATENT_DIM,
                z.cols()
            )));
        }
        let mut tape = Tape::new();
        let zn = tape.leaf(z.clone());
        let (mean, var, _) = self.decode_nodes(&mut tape, zn)?;
        Ok(GaussianBatchOutput {
            mean: tape.value(mean).clone(),
            variance: tape.value(var).clone(),
        })
    }

    /// encode -> latent (mean or sampled) -> decode.
    pub fn reconstruct(&self, x: &Matrix, mode: LatentMode) -> Result<GaussianBatchOutput> {
        let mut tape = Tape::new();
        let fwd = self.forward_nodes(&mut tape, x, mode)?;
        Ok(GaussianBatchOutput {
            mean: tape.value(fwd.out_mean).clone(),
            variance: tape.value(fwd.out_variance).clone(),
        })
    }

    /// λ-weighted Gaussian NLL (+ β·KL) of a complete target under the
    /// forward outputs, averaged over the batch. Returns the scalar loss
    /// node plus per-modality and KL nodes for the history.
    pub fn loss_nodes(
        &self,
        tape: &mut Tape,
        fwd: &ForwardNodes,
        target: &Matrix,
        beta: f64,
    ) -> Result<(NodeId, Vec<NodeId>, NodeId)> {
        if target.data().iter().any(|&v| v == MASK_VALUE) {
            return Err(Error::Contract(
                "loss target must be complete (no mask values)".into(),
            ));
        }
        let batch = target.rows() as f64;
        let target_node = tape.leaf(target.clone());
        let mut per_modality = Vec::with_capacity(5);
        let mut total: Option<NodeId> = None;
        for (spec, &(mean, var)) in MODALITIES.iter().zip(&fwd.per_modality) {
            let t = tape.slice_cols(target_node, spec.cols().start, spec.cols().end)?;
            let nll = gaussian_nll_sum(tape, t, mean, var)?;
            let weighted = tape.scale(nll, spec.lambda() / batch);
            per_modality.push(weighted);
            total = Some(match total {
                None => weighted,
                Some(acc) => tape.add(acc, weighted)?,
            });
        }
        let mut total = total.expect("at least one modality");
        // KL(q || N(0, I)) = 0.5 sum(exp(lv) + mu^2 - 1 - lv)
        let mu2 = tape.square(fwd.latent_mean);
        let elv = tape.exp(fwd.latent_log_var);
        let sum1 = tape.add(mu2, elv)?;
        let sum2 = tape.sub(sum1, fwd.latent_log_var)?;
        let sum3 = tape.add_scalar(sum2, -1.0);
        let kl_sum = tape.sum_all(sum3);
        let kl = tape.scale(kl_sum, 0.5 / batch);
        if beta != 0.0 {
            let weighted_kl = tape.scale(kl, beta);
            total = tape.add(total, weighted_kl)?;
        }
        Ok((total, per_modality, kl))
    }

    /// Denoising training: Adam on the λ-weighted NLL of complete targets
    /// given mask-augmented inputs.
    pub fn train(&mut self, data: &SplitDataset, config: &TrainConfig) -> Result<Vec<LossRecord>> {
        let mut batches = data.batches(config.batch_size, config.seed)?;
        let mut adam = AdamState::new(&self.store, config.learning_rate);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e3779b9));
        let mut history = Vec::with_capacity(config.steps);
        for step in 0..config.steps {
            adam.lr = config.lr_at(step);
            let (inputs, targets) = batches.next_batch();
            let mut tape = Tape::new();
            let input_node = tape.leaf(inputs);
            let (latent_mean, latent_log_var) = self.encode_nodes(&mut tape, input_node)?;
            let noise = sample_normal(config.batch_size, LATENT_DIM, &mut noise_rng);
            let latent = tape.reparameterize(latent_mean, latent_log_var, noise)?;
            let (out_mean, out_variance, per_modality) = self.decode_nodes(&mut tape, latent)?;
            let fwd = ForwardNodes {
                latent_mean,
                latent_log_var,
                latent,
                out_mean,
                out_variance,
                per_modality,
            };
            let (loss, per_mod, kl) = self.loss_nodes(&mut tape, &fwd, &targets, config.beta)?;
            let total = tape.value(loss).get(0, 0);
            if !total.is_finite() {
                return Err(Error::Training {
                    step,
                    reason: format!("loss became {}", total),
                });
            }
            history.push(LossRecord {
                step,
                total,
                per_modality: std::array::from_fn(|i| tape.value(per_mod[i]).get(0, 0)),
                kl: tape.value(kl).get(0, 0),
            });
            let mut grads = tape.backward(loss)?;
            if config.grad_clip > 0.0 {
                grads.clip_global_norm(config.grad_clip);
            }
            adam.step(&mut self.store, &grads)?;
        }
        Ok(history)
    }
}

/// Σ over all entries of 0.5 (ln 2π + ln σ² + (x-μ)²/σ²).
pub fn gaussian_nll_sum(
    tape: &mut Tape,
    target: NodeId,
    mean: NodeId,
    variance: NodeId,
) -> Result<NodeId> {
    const LN_2PI: f64 = 1.8378770664093453;
    let diff = tape.sub(target, mean)?;
    let sq = tape.square(diff);
    let ratio = tape.div(sq, variance)?;
    let lnv = tape.ln(variance);
    let sum = tape.add(ratio, lnv)?;
    let sum = tape.add_scalar(sum, LN_2PI);
    let total = tape.sum_all(sum);
    Ok(tape.scale(total, 0.5))
}

pub fn sample_normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}
