//! 28-dim sensorimotor samples and the four-pattern mask-augmented set.
//!
//! Canonical sample layout:
//! `[q_t(4), q_{t-1}(4), v_t(4), v_{t-1}(4), p_t, p_{t-1}, s_t, s_{t-1},
//!   u_t(4), u_{t-1}(4)]`.
//! Masked entries carry the sentinel -2, outside the normalized [-1, 1]
//! range of every observed value.

use crate::arm::BabbleTrace;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

pub const SAMPLE_DIMS: usize = 28;
pub const MASK_VALUE: f64 = -2.0;

pub const Q_T: Range<usize> = 0..4;
pub const Q_TM1: Range<usize> = 4..8;
pub const V_T: Range<usize> = 8..12;
pub const V_TM1: Range<usize> = 12..16;
pub const P_T: usize = 16;
pub const P_TM1: usize = 17;
pub const S_T: usize = 18;
pub const S_TM1: usize = 19;
pub const U_T: Range<usize> = 20..24;
pub const U_TM1: Range<usize> = 24..28;

/// Columns of the time-t block in trace-row order (q, v, p, s, u).
pub const T_BLOCK: [usize; 14] = [0, 1, 2, 3, 8, 9, 10, 11, 16, 18, 20, 21, 22, 23];
/// Columns of the time-(t-1) block, aligned with [`T_BLOCK`].
pub const TM1_BLOCK: [usize; 14] = [4, 5, 6, 7, 12, 13, 14, 15, 17, 19, 24, 25, 26, 27];
/// The 10 non-motor time-t columns (q_t, v_t, p_t, s_t).
pub const SENSORY_T: [usize; 10] = [0, 1, 2, 3, 8, 9, 10, 11, 16, 18];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSample(pub [f64; SAMPLE_DIMS]);

impl MultimodalSample {
    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|&v| v != MASK_VALUE)
    }
}

/// The four training-set rows: which (modality, time-slot) blocks are
/// observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskPattern {
    /// (1) all slots observed.
    Complete,
    /// (2) exactly the five t-1 blocks.
    PrevOnly,
    /// (3) q_{t-1}, v_t and v_{t-1}: the imitation footprint.
    VisionPlusPrevQ,
    /// (4) v_t and v_{t-1} only.
    VisionOnly,
}

pub const ALL_PATTERNS: [MaskPattern; 4] = [
    MaskPattern::Complete,
    MaskPattern::PrevOnly,
    MaskPattern::VisionPlusPrevQ,
    MaskPattern::VisionOnly,
];

impl MaskPattern {
    pub fn observed(&self) -> [bool; SAMPLE_DIMS] {
        let mut obs = [false; SAMPLE_DIMS];
        let mark_range = |obs: &mut [bool; SAMPLE_DIMS], r: Range<usize>| {
            for i in r {
                obs[i] = true;
            }
        };
        match self {
            MaskPattern::Complete => obs = [true; SAMPLE_DIMS],
            MaskPattern::PrevOnly => {
                mark_range(&mut obs, Q_TM1);
                mark_range(&mut obs, V_TM1);
                obs[P_TM1] = true;
                obs[S_TM1] = true;
                mark_range(&mut obs, U_TM1);
            }
            MaskPattern::VisionPlusPrevQ => {
                mark_range(&mut obs, Q_TM1);
                mark_range(&mut obs, V_T);
                mark_range(&mut obs, V_TM1);
            }
            MaskPattern::VisionOnly => {
                mark_range(&mut obs, V_T);
                mark_range(&mut obs, V_TM1);
            }
        }
        obs
    }

    pub fn id(&self) -> u8 {
        match self {
            MaskPattern::Complete => 1,
            MaskPattern::PrevOnly => 2,
            MaskPattern::VisionPlusPrevQ => 3,
            MaskPattern::VisionOnly => 4,
        }
    }

    pub fn from_id(id: u8) -> Result<MaskPattern> {
        ALL_PATTERNS
            .into_iter()
            .find(|p| p.id() == id)
            .ok_or_else(|| Error::Input(format!("unknown mask pattern id {}", id)))
    }

    pub fn parse(name: &str) -> Result<MaskPattern> {
        match name {
            "complete" => Ok(MaskPattern::Complete),
            "prev" => Ok(MaskPattern::PrevOnly),
            "imitation" => Ok(MaskPattern::VisionPlusPrevQ),
            "vision" => Ok(MaskPattern::VisionOnly),
            other => Err(Error::Input(format!("unknown pattern '{}'", other))),
        }
    }
}

/// Masked entries set to -2, observed entries untouched.
pub fn apply_mask(sample: &MultimodalSample, pattern: MaskPattern) -> MultimodalSample {
    let obs = pattern.observed();
    let mut out = *sample;
    for (v, keep) in out.0.iter_mut().zip(obs) {
        if !keep {
            *v = MASK_VALUE;
        }
    }
    out
}

/// One sample per consecutive pair of normalized trace rows.
pub fn make_samples(trace: &BabbleTrace) -> Result<Vec<MultimodalSample>> {
    if trace.len() < 2 {
        return Err(Error::Input(format!(
            "trace has {} rows; need at least 2",
            trace.len()
        )));
    }
    let rows = trace.normalized_rows();
    let mut samples = Vec::with_capacity(rows.len() - 1);
    for pair in rows.windows(2) {
        samples.push(sample_from_blocks(&pair[1], &pair[0]));
    }
    Ok(samples)
}

/// Assemble a sample from normalized 14-dim t and t-1 trace rows.
pub fn sample_from_blocks(t: &[f64; 14], tm1: &[f64; 14]) -> MultimodalSample {
    let mut d = [0.0; SAMPLE_DIMS];
    for (k, &col) in T_BLOCK.iter().enumerate() {
        d[col] = t[k];
    }
    for (k, &col) in TM1_BLOCK.iter().enumerate() {
        d[col] = tm1[k];
    }
    MultimodalSample(d)
}

/// Extract the 14-dim time-t block of a sample in trace-row order.
pub fn t_block(sample: &MultimodalSample) -> [f64; 14] {
    std::array::from_fn(|k| sample.0[T_BLOCK[k]])
}

/// The 4N-row augmented store: inputs carry the Table-style mask patterns
/// in block order (1)-(4), targets are the matching complete samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AugmentedDataset {
    pub inputs: Vec<MultimodalSample>,
    pub targets: Vec<MultimodalSample>,
    pub patterns: Vec<MaskPattern>,
    /// Index of the original sample each row was derived from.
    pub original_index: Vec<usize>,
    pub n_original: usize,
}

pub fn augment(samples: &[MultimodalSample]) -> Result<AugmentedDataset> {
    if samples.is_empty() {
        return Err(Error::Input("cannot augment an empty sample set".into()));
    }
    let n = samples.len();
    let mut inputs = Vec::with_capacity(4 * n);
    let mut targets = Vec::with_capacity(4 * n);
    let mut patterns = Vec::with_capacity(4 * n);
    let mut original_index = Vec::with_capacity(4 * n);
    for pattern in ALL_PATTERNS {
        for (i, s) in samples.iter().enumerate() {
            if !s.is_complete() {
                return Err(Error::Input(format!(
                    "original sample {} already contains the mask value",
                    i
                )));
            }
            inputs.push(apply_mask(s, pattern));
            targets.push(*s);
            patterns.push(pattern);
            original_index.push(i);
        }
    }
    Ok(AugmentedDataset {
        inputs,
        targets,
        patterns,
        original_index,
        n_original: n,
    })
}

impl AugmentedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Train/test split performed on ORIGINAL sample indices, so all four
/// masked variants of a sample always share its side of the split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub dataset: AugmentedDataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub train_originals: Vec<usize>,
    pub test_originals: Vec<usize>,
}

pub fn split(dataset: AugmentedDataset, ratio: f64, seed: u64) -> Result<SplitDataset> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Input(format!("split ratio {} not in (0, 1)", ratio)));
    }
    let n = dataset.n_original;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((n as f64) * ratio).round() as usize;
    let n_train = n_train.clamp(1, n.saturating_sub(1).max(1));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (row, &orig) in dataset.original_index.iter().enumerate() {
        if is_train[orig] {
            train_rows.push(row);
        } else {
            test_rows.push(row);
        }
    }
    let mut train_originals: Vec<usize> = order[..n_train].to_vec();
    let mut test_originals: Vec<usize> = order[n_train..].to_vec();
    train_originals.sort_unstable();
    test_originals.sort_unstable();
    Ok(SplitDataset {
        dataset,
        train_rows,
        test_rows,
        train_originals,
        test_originals,
    })
}

impl SplitDataset {
    /// Batches drawn uniformly with replacement from the train rows.
    pub fn batches(&self, batch_size: usize, seed: u64) -> Result<BatchStream<'_>> {
        if batch_size == 0 || batch_size > self.train_rows.len() {
            return Err(Error::Input(format!(
                "batch size {} out of range for {} train rows",
                batch_size,
                self.train_rows.len()
            )));
        }
        Ok(BatchStream {
            split: self,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Test-set (input, target) matrices under a single mask pattern,
    /// assembled from the held-out originals.
    pub fn test_matrices(&self, pattern: MaskPattern) -> Result<(Matrix, Matrix)> {
        if self.test_originals.is_empty() {
            return Err(Error::Input("empty test set".into()));
        }
        let mut inputs = Vec::with_capacity(self.test_originals.len());
        let mut targets = Vec::with_capacity(self.test_originals.len());
        for &orig in &self.test_originals {
            // block (1) rows are the complete samples in original order
            let complete = self.dataset.targets[orig];
            inputs.push(apply_mask(&complete, pattern).0.to_vec());
            targets.push(complete.0.to_vec());
        }
        Ok((
            Matrix::from_rows(&inputs)?,
            Matrix::from_rows(&targets)?,
        ))
    }
}

pub struct BatchStream<'a> {
    split: &'a SplitDataset,
    batch_size: usize,
    rng: ChaCha8Rng,
}

impl BatchStream<'_> {
    /// Next (masked inputs, complete targets) pair, batch x 28 each.
    pub fn next_batch(&mut self) -> (Matrix, Matrix) {
        let mut inputs = Matrix::zeros(self.batch_size, SAMPLE_DIMS);
        let mut targets = Matrix::zeros(self.batch_size, SAMPLE_DIMS);
        for b in 0..self.batch_size {
            let row = self.split.train_rows[self.rng.random_range(0..self.split.train_rows.len())];
            inputs.row_mut(b).copy_from_slice(&self.split.dataset.inputs[row].0);
            targets
                .row_mut(b)
                .copy_from_slice(&self.split.dataset.targets[row].0);
        }
        (inputs, targets)
    }
}
