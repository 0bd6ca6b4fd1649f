//! Comparison models and the comparison harness: a vanilla (monolithic)
//! VAE trained with either zero-dropout denoising or the mask-augmented
//! dataset, and independent forward/inverse feed-forward regressors; all
//! scored on the three comparison cases.

use crate::autodiff::Tape;
use crate::dataset::{
    MaskPattern, SplitDataset, MASK_VALUE, SAMPLE_DIMS, SENSORY_T, T_BLOCK, U_T,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{
    gaussian_nll_sum, sample_normal, LatentMode, MmVae, TrainConfig, LATENT_DIM, LOG_VAR_CLAMP,
    VAR_CEIL, VAR_FLOOR,
};
use crate::nn::{Activation, AdamState, DenseLayer, Mlp, ParamStore};
use crate::tasks::mse_percent;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The three comparison cases and the slice of the sample they score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComparisonCase {
    /// Predict the current sensory state from the previous one
    /// (PREV_ONLY footprint; scores the 10 non-motor t dims).
    Forward,
    /// Predict the motor command from vision alone (VISION_ONLY
    /// footprint; scores u_t).
    Inverse,
    /// Predict the whole sensorimotor state from vision plus the previous
    /// joint configuration (scores the full 14-dim t block).
    Imitation,
}

pub const ALL_CASES: [ComparisonCase; 3] = [
    ComparisonCase::Forward,
    ComparisonCase::Inverse,
    ComparisonCase::Imitation,
];

impl ComparisonCase {
    pub fn pattern(&self) -> MaskPattern {
        match self {
            ComparisonCase::Forward => MaskPattern::PrevOnly,
            ComparisonCase::Inverse => MaskPattern::VisionOnly,
            ComparisonCase::Imitation => MaskPattern::VisionPlusPrevQ,
        }
    }

    pub fn scored_cols(&self) -> Vec<usize> {
        match self {
            ComparisonCase::Forward => SENSORY_T.to_vec(),
            ComparisonCase::Inverse => U_T.collect(),
            ComparisonCase::Imitation => T_BLOCK.to_vec(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ComparisonCase::Forward => "forward",
            ComparisonCase::Inverse => "inverse",
            ComparisonCase::Imitation => "imitation",
        }
    }
}

// --- vanilla VAE -----------------------------------------------------------

/// How the vanilla VAE sees missing data during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VanillaMode {
    /// Complete rows with independent per-entry zeroing (probability 0.3).
    ZeroDropout,
    /// The same Table-1 mask augmentation the multimodal model trains on.
    Augmented,
}

/// Monolithic VAE: 28 -> 100 -> 100 -> latent 28 -> 100 -> 100 -> 28 mean
/// + 28 variance; no modality sub-networks.
pub struct VanillaVae {
    pub store: ParamStore,
    encoder: [DenseLayer; 2],
    latent_mean_head: DenseLayer,
    latent_lv_head: DenseLayer,
    decoder: [DenseLayer; 2],
    mean_head: DenseLayer,
    var_head: DenseLayer,
    pub mode: VanillaMode,
    pub init_seed: u64,
}

impl VanillaVae {
    pub fn new(mode: VanillaMode, seed: u64) -> VanillaVae {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let encoder = [
            DenseLayer::new(&mut store, SAMPLE_DIMS, 100, Activation::Relu, &mut rng),
            DenseLayer::new(&mut store, 100, 100, Activation::Relu, &mut rng),
        ];
        let latent_mean_head =
            DenseLayer::new(&mut store, 100, LATENT_DIM, Activation::Linear, &mut rng);
        let latent_lv_head =
            DenseLayer::new(&mut store, 100, LATENT_DIM, Activation::Linear, &mut rng);
        let decoder = [
            DenseLayer::new(&mut store, LATENT_DIM, 100, Activation::Relu, &mut rng),
            DenseLayer::new(&mut store, 100, 100, Activation::Relu, &mut rng),
        ];
        let mean_head = DenseLayer::new(&mut store, 100, SAMPLE_DIMS, Activation::Linear, &mut rng);
        let var_head =
            DenseLayer::new(&mut store, 100, SAMPLE_DIMS, Activation::Softplus, &mut rng);
        VanillaVae {
            store,
            encoder,
            latent_mean_head,
            latent_lv_head,
            decoder,
            mean_head,
            var_head,
            mode,
            init_seed: seed,
        }
    }

    fn forward_on_tape(
        &self,
        tape: &mut Tape,
        x: &Matrix,
        latent_noise: Option<Matrix>,
    ) -> Result<(crate::autodiff::NodeId, crate::autodiff::NodeId, crate::autodiff::NodeId, crate::autodiff::NodeId)> {
        let input = tape.leaf(x.clone());
        let h = self.encoder[0].forward(tape, &self.store, input)?;
        let h = self.encoder[1].forward(tape, &self.store, h)?;
        let latent_mean = self.latent_mean_head.forward(tape, &self.store, h)?;
        let lv = self.latent_lv_head.forward(tape, &self.store, h)?;
        let latent_lv = tape.clamp(lv, LOG_VAR_CLAMP.0, LOG_VAR_CLAMP.1);
        let z = match latent_noise {
            Some(noise) => tape.reparameterize(latent_mean, latent_lv, noise)?,
            None => latent_mean,
        };
        let h = self.decoder[0].forward(tape, &self.store, z)?;
        let h = self.decoder[1].forward(tape, &self.store, h)?;
        let mean = self.mean_head.forward(tape, &self.store, h)?;
        let var = self.var_head.forward(tape, &self.store, h)?;
        let var = tape.add_scalar(var, VAR_FLOOR);
        let var = tape.clamp(var, VAR_FLOOR, VAR_CEIL);
        Ok((mean, var, latent_mean, latent_lv))
    }

    /// Reconstruction mean for a batch; missing entries must already carry
    /// this model's missing-data convention (0 or -2).
    pub fn reconstruct_mean(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let (mean, _, _, _) = self.forward_on_tape(&mut tape, x, None)?;
        Ok(tape.value(mean).clone())
    }

    /// The sentinel this model expects in masked slots.
    pub fn missing_value(&self) -> f64 {
        match self.mode {
            VanillaMode::ZeroDropout => 0.0,
            VanillaMode::Augmented => MASK_VALUE,
        }
    }
}

/// Train a vanilla VAE in the given mode. Zero-dropout draws complete rows
/// and zeroes entries independently; augmented mode consumes the same
/// masked batches as the multimodal model.
pub fn train_vanilla(
    data: &SplitDataset,
    mode: VanillaMode,
    config: &TrainConfig,
    dropout_probability: f64,
) -> Result<(VanillaVae, Vec<f64>)> {
    let mut model = VanillaVae::new(mode, config.seed);
    let mut adam = AdamState::new(&model.store, config.learning_rate);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x51ed270b));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0xb10c8a11));
    let mut batches = data.batches(config.batch_size, config.seed)?;
    let mut history = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        adam.lr = config.lr_at(step);
        let (inputs, targets) = match mode {
            VanillaMode::Augmented => batches.next_batch(),
            VanillaMode::ZeroDropout => {
                // complete rows, independent per-entry zeroing
                let (_, targets) = batches.next_batch();
                let mut inputs = targets.clone();
                for v in inputs.data_mut() {
                    if dropout_rng.random::<f64>() < dropout_probability {
                        *v = 0.0;
                    }
                }
                (inputs, targets)
            }
        };
        let mut tape = Tape::new();
        let noise = sample_normal(config.batch_size, LATENT_DIM, &mut noise_rng);
        let (mean, var, _, _) = model.forward_on_tape(&mut tape, &inputs, Some(noise))?;
        let target_node = tape.leaf(targets);
        let nll = gaussian_nll_sum(&mut tape, target_node, mean, var)?;
        let loss = tape.scale(nll, 1.0 / (config.batch_size * SAMPLE_DIMS) as f64);
        let total = tape.value(loss).get(0, 0);
        if !total.is_finite() {
            return Err(Error::Training {
                step,
                reason: format!("loss became {}", total),
            });
        }
        history.push(total);
        let mut grads = tape.backward(loss)?;
        if config.grad_clip > 0.0 {
            grads.clip_global_norm(config.grad_clip);
        }
        adam.step(&mut model.store, &grads)?;
    }
    Ok((model, history))
}

// --- forward / inverse regressors ------------------------------------------

/// Sample columns forming the 20-dim inverse-model input: sensory state at
/// t-1 then at t (q, v, p, s each).
pub const INVERSE_INPUT_COLS: [usize; 20] = [
    4, 5, 6, 7, 12, 13, 14, 15, 17, 19, // sensory t-1
    0, 1, 2, 3, 8, 9, 10, 11, 16, 18, // sensory t
];

/// Sample columns forming the 14-dim forward-model input (the t-1 block:
/// q, v, p, s, u).
pub const FORWARD_INPUT_COLS: [usize; 14] = [4, 5, 6, 7, 12, 13, 14, 15, 17, 19, 24, 25, 26, 27];

/// t-1 block -> 10-dim sensory t block.
pub struct ForwardModel {
    pub store: ParamStore,
    mlp: Mlp,
    pub init_seed: u64,
}

/// 20-dim sensory state at t-1 and t -> u_t.
pub struct InverseModel {
    pub store: ParamStore,
    mlp: Mlp,
    pub init_seed: u64,
}

impl ForwardModel {
    pub fn new(seed: u64) -> ForwardModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            &mut store,
            &[14, 14, 10],
            Activation::Tanh,
            Activation::Linear,
            &mut rng,
        );
        ForwardModel {
            store,
            mlp,
            init_seed: seed,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let y = self.mlp.forward(&mut tape, &self.store, input)?;
        Ok(tape.value(y).clone())
    }
}

impl InverseModel {
    pub fn new(seed: u64) -> InverseModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(
            &mut store,
            &[20, 100, 100, 4],
            Activation::Tanh,
            Activation::Linear,
            &mut rng,
        );
        InverseModel {
            store,
            mlp,
            init_seed: seed,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let y = self.mlp.forward(&mut tape, &self.store, input)?;
        Ok(tape.value(y).clone())
    }
}

fn select_cols(src: &Matrix, cols: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(src.rows(), cols.len());
    for r in 0..src.rows() {
        for (j, &c) in cols.iter().enumerate() {
            out.set(r, j, src.get(r, c));
        }
    }
    out
}

fn train_regressor(
    store: &mut ParamStore,
    mlp: &Mlp,
    data: &SplitDataset,
    in_cols: &[usize],
    out_cols: &[usize],
    config: &TrainConfig,
) -> Result<()> {
    let mut adam = AdamState::new(store, config.learning_rate);
    let mut batches = data.batches(config.batch_size, config.seed)?;
    for step in 0..config.steps {
        adam.lr = config.lr_at(step);
        // complete rows only: the regressors are plain supervised models
        let (_, targets) = batches.next_batch();
        let x = select_cols(&targets, in_cols);
        let y = select_cols(&targets, out_cols);
        let mut tape = Tape::new();
        let input = tape.leaf(x);
        let target = tape.leaf(y);
        let pred = mlp.forward(&mut tape, store, input)?;
        let d = tape.sub(pred, target)?;
        let sq = tape.square(d);
        let s = tape.sum_all(sq);
        let loss = tape.scale(s, 1.0 / (config.batch_size * out_cols.len()) as f64);
        if !tape.value(loss).get(0, 0).is_finite() {
            return Err(Error::Training {
                step,
                reason: "regression loss diverged".into(),
            });
        }
        let mut grads = tape.backward(loss)?;
        if config.grad_clip > 0.0 {
            grads.clip_global_norm(config.grad_clip);
        }
        adam.step(store, &grads)?;
    }
    Ok(())
}

/// Train the two independent supervised models on complete rows.
pub fn train_fwd_inv(
    data: &SplitDataset,
    config: &TrainConfig,
) -> Result<(ForwardModel, InverseModel)> {
    let mut fwd = ForwardModel::new(config.seed);
    let mlp = fwd.mlp.clone();
    train_regressor(
        &mut fwd.store,
        &mlp,
        data,
        &FORWARD_INPUT_COLS,
        &SENSORY_T,
        config,
    )?;
    let mut inv = InverseModel::new(config.seed.wrapping_add(1));
    let mlp = inv.mlp.clone();
    let u_cols: Vec<usize> = U_T.collect();
    train_regressor(&mut inv.store, &mlp, data, &INVERSE_INPUT_COLS, &u_cols, config)?;
    Ok((fwd, inv))
}

/// Chain the two regressors to predict the full 14-dim t block from the
/// imitation footprint (q_{t-1}, v_t, v_{t-1} observed). Missing inverse
/// inputs are imputed with 0; the forward model's u slot carries the
/// inferred command.
pub fn imitation_case_chain(
    fwd: &ForwardModel,
    inv: &InverseModel,
    targets: &Matrix,
) -> Result<Matrix> {
    // inverse input from the footprint: q_{t-1}, v_{t-1}, v_t observed
    let observed = MaskPattern::VisionPlusPrevQ.observed();
    let mut inv_in = Matrix::zeros(targets.rows(), 20);
    for r in 0..targets.rows() {
        for (j, &c) in INVERSE_INPUT_COLS.iter().enumerate() {
            if observed[c] {
                inv_in.set(r, j, targets.get(r, c));
            }
        }
    }
    let u_hat = inv.predict(&inv_in)?;
    let mut fwd_in = Matrix::zeros(targets.rows(), 14);
    for r in 0..targets.rows() {
        for (j, &c) in FORWARD_INPUT_COLS.iter().enumerate() {
            if j < 10 {
                if observed[c] {
                    fwd_in.set(r, j, targets.get(r, c));
                }
            } else {
                fwd_in.set(r, j, u_hat.get(r, j - 10));
            }
        }
    }
    let sensory_hat = fwd.predict(&fwd_in)?;
    // t block layout: q_t, v_t, p_t, s_t (10 dims), then u_t
    let mut out = Matrix::zeros(targets.rows(), 14);
    for r in 0..targets.rows() {
        for j in 0..10 {
            out.set(r, j, sensory_hat.get(r, j));
        }
        for j in 0..4 {
            out.set(r, 10 + j, u_hat.get(r, j));
        }
    }
    Ok(out)
}

// --- case evaluation ---------------------------------------------------------

/// One trained set of all comparison models sharing a split.
pub struct ModelSet {
    pub mmvae: MmVae,
    pub vanilla: VanillaVae,
    pub vanilla_aug: VanillaVae,
    pub forward: ForwardModel,
    pub inverse: InverseModel,
}

pub const METHOD_NAMES: [&str; 4] = ["mmvae", "vanilla", "vanilla-aug", "fwd-inv"];

fn eval_reconstructor(
    reconstruct: impl Fn(&Matrix) -> Result<Matrix>,
    missing: f64,
    data: &SplitDataset,
    case: ComparisonCase,
) -> Result<f64> {
    let (mut inputs, targets) = data.test_matrices(case.pattern())?;
    if missing != MASK_VALUE {
        for v in inputs.data_mut() {
            if *v == MASK_VALUE {
                *v = missing;
            }
        }
    }
    let mean = reconstruct(&inputs)?;
    mse_percent(&mean, &targets, &case.scored_cols())
}

/// Score one method on one case; MSE% over the case's scored slice.
pub fn evaluate_case(models: &ModelSet, data: &SplitDataset, case: ComparisonCase, method: &str) -> Result<f64> {
    match method {
        "mmvae" => eval_reconstructor(
            |x| Ok(models.mmvae.reconstruct(x, LatentMode::Mean)?.mean),
            MASK_VALUE,
            data,
            case,
        ),
        "vanilla" => eval_reconstructor(
            |x| models.vanilla.reconstruct_mean(x),
            models.vanilla.missing_value(),
            data,
            case,
        ),
        "vanilla-aug" => eval_reconstructor(
            |x| models.vanilla_aug.reconstruct_mean(x),
            models.vanilla_aug.missing_value(),
            data,
            case,
        ),
        "fwd-inv" => {
            let (_, targets) = data.test_matrices(case.pattern())?;
            match case {
                ComparisonCase::Forward => {
                    // the forward model's own function: full t-1 block in
                    let x = select_cols(&targets, &FORWARD_INPUT_COLS);
                    let pred = models.forward.predict(&x)?;
                    let truth = select_cols(&targets, &SENSORY_T);
                    mse_percent(&pred, &truth, &(0..10).collect::<Vec<_>>())
                }
                ComparisonCase::Inverse => {
                    // the inverse model's own function: full 20-dim input
                    let x = select_cols(&targets, &INVERSE_INPUT_COLS);
                    let pred = models.inverse.predict(&x)?;
                    let u_cols: Vec<usize> = U_T.collect();
                    let truth = select_cols(&targets, &u_cols);
                    mse_percent(&pred, &truth, &[0, 1, 2, 3])
                }
                ComparisonCase::Imitation => {
                    let pred = imitation_case_chain(&models.forward, &models.inverse, &targets)?;
                    let truth = select_cols(&targets, &T_BLOCK);
                    mse_percent(&pred, &truth, &(0..14).collect::<Vec<_>>())
                }
            }
        }
        other => Err(Error::Input(format!("unknown method {:?}", other))),
    }
}

// --- the comparison harness --------------------------------------------------

/// Training budgets for one comparison repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonProfile {
    pub mmvae: TrainConfig,
    pub vanilla: TrainConfig,
    pub fwd_inv: TrainConfig,
    pub dropout_probability: f64,
}

impl ComparisonProfile {
    pub fn desk(seed: u64) -> ComparisonProfile {
        ComparisonProfile {
            mmvae: TrainConfig::desk(seed),
            vanilla: TrainConfig {
                steps: 24000,
                batch_size: 128,
                learning_rate: 1e-3,
                final_learning_rate: 1e-4,
                seed,
                beta: 0.0,
                grad_clip: 10.0,
            },
            fwd_inv: TrainConfig {
                steps: 24000,
                batch_size: 128,
                learning_rate: 1e-3,
                final_learning_rate: 1e-4,
                seed,
                beta: 0.0,
                grad_clip: 10.0,
            },
            dropout_probability: 0.3,
        }
    }
}

/// Train every method with one seed.
pub fn train_model_set(data: &SplitDataset, profile: &ComparisonProfile) -> Result<ModelSet> {
    let mut mmvae = MmVae::new(profile.mmvae.seed);
    mmvae.train(data, &profile.mmvae)?;
    let (vanilla, _) = train_vanilla(
        data,
        VanillaMode::ZeroDropout,
        &profile.vanilla,
        profile.dropout_probability,
    )?;
    let (vanilla_aug, _) = train_vanilla(
        data,
        VanillaMode::Augmented,
        &profile.vanilla,
        profile.dropout_probability,
    )?;
    let (forward, inverse) = train_fwd_inv(data, &profile.fwd_inv)?;
    Ok(ModelSet {
        mmvae,
        vanilla,
        vanilla_aug,
        forward,
        inverse,
    })
}

/// median / Q1 / Q3 with linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::Input("quartiles of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let at = |p: f64| -> f64 {
        let idx = p * (sorted.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        if lo == hi {
            sorted[lo]
        } else {
            sorted[lo] + (idx - lo as f64) * (sorted[hi] - sorted[lo])
        }
    };
    Ok(Quartiles {
        median: at(0.5),
        q1: at(0.25),
        q3: at(0.75),
    })
}

/// One raw score: method x case x repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub method: String,
    pub case: String,
    pub repetition: usize,
    pub seed: u64,
    pub mse_percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// method -> case -> quartiles, in METHOD_NAMES x ALL_CASES order.
    pub cells: Vec<Vec<Quartiles>>,
    pub raw: Vec<RawScore>,
    pub repetitions: usize,
}

impl ComparisonTable {
    pub fn cell(&self, method: &str, case: ComparisonCase) -> Option<Quartiles> {
        let mi = METHOD_NAMES.iter().position(|m| *m == method)?;
        let ci = ALL_CASES.iter().position(|c| *c == case)?;
        Some(self.cells[mi][ci])
    }

    /// CSV rendering: method, case, median, q1, q3.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut out = format!("# config_hash={}\nmethod,case,median,q1,q3\n", config_hash);
        for (mi, method) in METHOD_NAMES.iter().enumerate() {
            for (ci, case) in ALL_CASES.iter().enumerate() {
                let q = self.cells[mi][ci];
                out += &format!(
                    "{},{},{:.6},{:.6},{:.6}\n",
                    method,
                    case.name(),
                    q.median,
                    q.q1,
                    q.q3
                );
            }
        }
        out
    }

    /// Aligned markdown rendering of median [q1; q3] per cell.
    pub fn to_markdown(&self) -> String {
        let mut rows: Vec<[String; 4]> = Vec::new();
        rows.push([
            "method".into(),
            "forward".into(),
            "inverse".into(),
            "imitation".into(),
        ]);
        for (mi, method) in METHOD_NAMES.iter().enumerate() {
            let mut row = [String::new(), String::new(), String::new(), String::new()];
            row[0] = method.to_string();
            for ci in 0..3 {
                let q = self.cells[mi][ci];
                row[ci + 1] = format!("{:.2}% [{:.2}; {:.2}]%", q.median, q.q1, q.q3);
            }
            rows.push(row);
        }
        let widths: [usize; 4] =
            std::array::from_fn(|c| rows.iter().map(|r| r[c].len()).max().unwrap());
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            out += "|";
            for c in 0..4 {
                out += &format!(" {:<width$} |", row[c], width = widths[c]);
            }
            out += "\n";
            if i == 0 {
                out += "|";
                for w in widths {
                    out += &format!("{:-<width$}|", "", width = w + 2);
                }
                out += "\n";
            }
        }
        out
    }

    /// JSON-lines rendering of the raw scores.
    pub fn raw_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for score in &self.raw {
            out += &serde_json::to_string(score)?;
            out += "\n";
        }
        Ok(out)
    }
}

/// Run `repetitions` independent train/eval rounds with distinct seeds and
/// aggregate quartiles per method x case. All methods in one repetition
/// share the dataset (hence split and normalization).
pub fn compare(
    data: &SplitDataset,
    base_profile: &ComparisonProfile,
    repetitions: usize,
) -> Result<ComparisonTable> {
    if repetitions == 0 {
        return Err(Error::Input("compare requires at least one repetition".into()));
    }
    let mut scores: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); 3]; METHOD_NAMES.len()];
    let mut raw = Vec::new();
    for rep in 0..repetitions {
        let mut profile = base_profile.clone();
        let seed = base_profile.mmvae.seed + rep as u64;
        profile.mmvae.seed = seed;
        profile.vanilla.seed = seed;
        profile.fwd_inv.seed = seed;
        let models = train_model_set(data, &profile)?;
        for (mi, method) in METHOD_NAMES.iter().enumerate() {
            for (ci, case) in ALL_CASES.iter().enumerate() {
                let score = evaluate_case(&models, data, *case, method)?;
                scores[mi][ci].push(score);
                raw.push(RawScore {
                    method: method.to_string(),
                    case: case.name().to_string(),
                    repetition: rep,
                    seed,
                    mse_percent: score,
                });
            }
        }
    }
    let cells = scores
        .iter()
        .map(|per_case| {
            per_case
                .iter()
                .map(|v| quartiles(v))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        cells,
        raw,
        repetitions,
    })
}
