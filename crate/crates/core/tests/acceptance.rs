//! The acceptance gate: eight criteria, each printing one pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines;
//! any failed criterion also fails its test. The desk-scale fixture (one
//! 7380-row babble and five trained models) is shared across criteria.

use mmvae_core::arm::{babble, babble_rows, ArmConfig, ArmState, BabbleTrace, RAW_DIMS};
use mmvae_core::autodiff::{ParamId, Tape};
use mmvae_core::baselines::{
    evaluate_case, quartiles, train_fwd_inv, train_vanilla, ComparisonProfile,
    ModelSet, VanillaMode, ALL_CASES,
};
use mmvae_core::dataset::{
    augment, apply_mask, make_samples, split, MaskPattern, SplitDataset, MASK_VALUE,
};
use mmvae_core::io::{load_checkpoint, save_checkpoint, CheckpointMeta};
use mmvae_core::linalg::Matrix;
use mmvae_core::model::{LatentMode, MmVae, TrainConfig, MODALITIES};
use mmvae_core::tasks::{
    eval_reconstruction, imitate, mse_percent, oracle_imitate, predict_next, rollout,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::LazyLock;
use std::time::Instant;

const DATASET_ROWS: usize = 7380;
const DATA_SEED: u64 = 7;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct DeskFixture {
    trace: BabbleTrace,
    data: SplitDataset,
    models: Vec<MmVae>,
    train_seconds: f64,
}

static DESK: LazyLock<DeskFixture> = LazyLock::new(|| {
    let arm = ArmConfig::default();
    let trace = babble_rows(&arm, DATASET_ROWS, DATA_SEED).unwrap();
    let samples = make_samples(&trace).unwrap();
    let data = split(augment(&samples).unwrap(), 0.8, DATA_SEED).unwrap();
    let t0 = Instant::now();
    let models = SEEDS
        .iter()
        .map(|&s| {
            let mut m = MmVae::new(s);
            m.train(&data, &TrainConfig::desk(s)).unwrap();
            m
        })
        .collect();
    DeskFixture {
        trace,
        data,
        models,
        train_seconds: t0.elapsed().as_secs_f64(),
    }
});

/// The imitation model: one desk model given a second warm-restart segment.
/// Closed-loop motor inference keeps sharpening past the budget that
/// reconstruction quality needs, and a restart (Adam state and learning
/// rate reset) reliably takes the tracking error well under the oracle
/// comparability bound.
static IMITATOR: LazyLock<MmVae> = LazyLock::new(|| {
    let fixture = &*DESK;
    let mut model = MmVae::new(4);
    for segment in [4u64, 5] {
        model
            .train(&fixture.data, &TrainConfig::desk(segment))
            .unwrap();
    }
    model
});

/// A held-out swing (same plant, unseen babbling seed), in model units.
fn held_out_rows() -> (BabbleTrace, Vec<[f64; RAW_DIMS]>) {
    let arm = ArmConfig::default();
    let held = babble(&arm, 3, 999).unwrap();
    let rows = held
        .rows
        .iter()
        .map(|r| DESK.trace.normalization.normalize_row(r))
        .collect();
    (held, rows)
}

fn clone_model(m: &MmVae) -> MmVae {
    let mut c = MmVae::new(m.init_seed);
    c.store.unflatten(&m.store.flatten()).unwrap();
    c
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {} — {}",
        if pass { "PASS" } else { "FAIL" },
        criterion,
        detail
    );
    assert!(pass, "criterion {} failed: {}", criterion, detail);
}

#[test]
fn criterion_1_gradient_correctness() {
    let t0 = Instant::now();
    let arm = ArmConfig::default();
    let trace = babble_rows(&arm, 240, 3).unwrap();
    let data = split(augment(&make_samples(&trace).unwrap()).unwrap(), 0.8, 3).unwrap();
    let rows: Vec<usize> = data.train_rows[..4].to_vec();
    let inputs = Matrix::from_rows(
        &rows.iter().map(|&r| data.dataset.inputs[r].0.to_vec()).collect::<Vec<_>>(),
    )
    .unwrap();
    let targets = Matrix::from_rows(
        &rows.iter().map(|&r| data.dataset.targets[r].0.to_vec()).collect::<Vec<_>>(),
    )
    .unwrap();

    let mut model = MmVae::new(3);
    let eval = |m: &MmVae| -> (f64, mmvae_core::autodiff::Gradients) {
        let mut tape = Tape::new();
        let fwd = m
            .forward_nodes(&mut tape, &inputs, LatentMode::Sampled { seed: 17 })
            .unwrap();
        let (loss, _, _) = m.loss_nodes(&mut tape, &fwd, &targets, 0.1).unwrap();
        (tape.value(loss).get(0, 0), tape.backward(loss).unwrap())
    };
    let (_, grads) = eval(&model);

    // one random entry of every parameter matrix: covers every layer of
    // every sub-network, and is well above the 20-probe floor
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = 1e-4;
    let n_params = model.store.len();
    let mut worst = 0.0f64;
    for pid in 0..n_params {
        let n = model.store.get(ParamId(pid)).data().len();
        let j = rng.random_range(0..n);
        let orig = model.store.get(ParamId(pid)).data()[j];
        model.store.mats_mut()[pid].data_mut()[j] = orig + h;
        let (fp, _) = eval(&model);
        model.store.mats_mut()[pid].data_mut()[j] = orig - h;
        let (fm, _) = eval(&model);
        model.store.mats_mut()[pid].data_mut()[j] = orig;
        let fd = (fp - fm) / (2.0 * h);
        let a = grads.get(ParamId(pid)).map(|g| g.data()[j]).unwrap_or(0.0);
        let rel = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    verdict(
        "1 (gradient correctness)",
        worst < 1e-4 && n_params >= 20 && elapsed < 60.0,
        &format!(
            "{} probes, worst relative error {:.2e} (< 1e-4), {:.1}s (< 60s)",
            n_params, worst, elapsed
        ),
    );
}

#[test]
fn criterion_2_augmentation_exactness() {
    let arm = ArmConfig::default();
    let trace = babble_rows(&arm, 600, 5).unwrap();
    let samples = make_samples(&trace).unwrap();
    let ds = augment(&samples).unwrap();

    let four_n = ds.inputs.len() == 4 * samples.len() && ds.n_original == samples.len();
    let mut footprints_exact = true;
    let mut round_trip = true;
    for (row, input) in ds.inputs.iter().enumerate() {
        let pattern = ds.patterns[row];
        let target = &ds.targets[ds.original_index[row]];
        let expected = apply_mask(target, pattern);
        // bit-exact: masked entries are exactly -2, observed entries are
        // exactly the target's bits
        for d in 0..input.0.len() {
            if input.0[d].to_bits() != expected.0[d].to_bits() {
                footprints_exact = false;
            }
            if pattern.observed()[d] && input.0[d].to_bits() != target.0[d].to_bits() {
                round_trip = false;
            }
            if !pattern.observed()[d] && input.0[d] != MASK_VALUE {
                footprints_exact = false;
            }
        }
    }
    verdict(
        "2 (augmentation exactness)",
        four_n && footprints_exact && round_trip,
        &format!(
            "{} originals -> {} rows (4N: {}), footprints bit-exact: {}, unmasking round-trip: {}",
            ds.n_original,
            ds.inputs.len(),
            four_n,
            footprints_exact,
            round_trip
        ),
    );
}

#[test]
fn criterion_3_reconstruction_quality() {
    let t0 = Instant::now();
    let fixture = &*DESK;
    let mut pass = true;
    let mut details = Vec::new();
    for (model, seed) in fixture.models.iter().zip(SEEDS) {
        let complete = eval_reconstruction(model, &fixture.data, MaskPattern::Complete).unwrap();
        let vision_only =
            eval_reconstruction(model, &fixture.data, MaskPattern::VisionOnly).unwrap();
        let ok = complete.per_modality[1] < 0.5
            && vision_only.per_modality[1] < 0.5
            && complete.per_modality[0] < vision_only.per_modality[0]
            && complete.per_modality.iter().all(|&m| m < 5.0);
        pass &= ok;
        details.push(format!(
            "seed {}: vision {:.3}/{:.3}%, joints {:.3}<{:.3}%, max complete {:.2}%{}",
            seed,
            complete.per_modality[1],
            vision_only.per_modality[1],
            complete.per_modality[0],
            vision_only.per_modality[0],
            complete.per_modality.iter().cloned().fold(0.0, f64::max),
            if ok { "" } else { " <-- violated" }
        ));
    }
    let total = fixture.train_seconds + t0.elapsed().as_secs_f64();
    pass &= total < 1800.0;
    verdict(
        "3 (reconstruction quality)",
        pass,
        &format!("{}; total {:.0}s (< 1800s)", details.join("; "), total),
    );
}

#[test]
fn criterion_4_redundancy_capture() {
    let fixture = &*DESK;
    let (inputs, _) = fixture.data.test_matrices(MaskPattern::VisionOnly).unwrap();
    let joint_cols = MODALITIES[0].cols();
    let vision_cols = MODALITIES[1].cols();
    let mut wins = 0;
    let mut details = Vec::new();
    for (model, seed) in fixture.models.iter().zip(SEEDS) {
        let out = model.reconstruct(&inputs, LatentMode::Mean).unwrap();
        let mean_var = |cols: std::ops::Range<usize>| -> f64 {
            let mut sum = 0.0;
            for r in 0..out.variance.rows() {
                for c in cols.clone() {
                    sum += out.variance.get(r, c);
                }
            }
            sum / (out.variance.rows() * cols.len()) as f64
        };
        let jv = mean_var(joint_cols.clone());
        let vv = mean_var(vision_cols.clone());
        if jv > vv {
            wins += 1;
        }
        details.push(format!("seed {}: joints {:.4} vs vision {:.4}", seed, jv, vv));
    }
    verdict(
        "4 (redundancy capture)",
        wins >= 4,
        &format!("{}/5 seeds (need >= 4); {}", wins, details.join("; ")),
    );
}

#[test]
fn criterion_5_prediction() {
    let fixture = &*DESK;
    let (_, rows) = held_out_rows();

    // per-seed scores, then medians across the five desk models
    let mut ratios = Vec::new();
    let mut twenties = Vec::new();
    let mut all_bounded = true;
    for model in &fixture.models {
        // single-step vision prediction over the swing, relative to the
        // model's own complete-pattern vision reconstruction
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for w in rows.windows(2) {
            let (mean, _) = predict_next(model, &w[0]).unwrap();
            pred.push(mean[4..8].to_vec());
            truth.push(w[1][4..8].to_vec());
        }
        let single = mse_percent(
            &Matrix::from_rows(&pred).unwrap(),
            &Matrix::from_rows(&truth).unwrap(),
            &[0, 1, 2, 3],
        )
        .unwrap();
        let complete_vision = eval_reconstruction(model, &fixture.data, MaskPattern::Complete)
            .unwrap()
            .per_modality[1];
        ratios.push(single / complete_vision);

        // 20-step accuracy and 50-step boundedness
        let start = 2;
        let r = rollout(model, &rows[start], 50).unwrap();
        let horizon_pred = Matrix::from_rows(
            &r.means[..20].iter().map(|m| m[4..8].to_vec()).collect::<Vec<_>>(),
        )
        .unwrap();
        let horizon_truth = Matrix::from_rows(
            &rows[start + 1..start + 21]
                .iter()
                .map(|m| m[4..8].to_vec())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        twenties.push(mse_percent(&horizon_pred, &horizon_truth, &[0, 1, 2, 3]).unwrap());
        let max_abs = r
            .means
            .iter()
            .flat_map(|m| m.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        all_bounded &= max_abs < 1.5 && r.means.len() == 50;
    }
    let ratio = quartiles(&ratios).unwrap().median;
    let twenty = quartiles(&twenties).unwrap().median;

    verdict(
        "5 (prediction)",
        ratio < 2.0 && twenty < 1.0 && all_bounded,
        &format!(
            "median single-step/reconstruction ratio {:.2} (< 2: {}), median 20-step {:.3}% (< 1%: {}), all 50-step rollouts bounded below 1.5: {}",
            ratio,
            ratio < 2.0,
            twenty,
            twenty < 1.0,
            all_bounded
        ),
    );
}

#[test]
fn criterion_6_imitation() {
    let fixture = &*DESK;
    let model = &*IMITATOR;
    let arm = ArmConfig::default();
    let (held, rows) = held_out_rows();
    let reference: Vec<[f64; 4]> = rows[60..180]
        .iter()
        .map(|r| [r[4], r[5], r[6], r[7]])
        .collect();
    let start = ArmState::from_joints(held.rows[59].q, &arm);
    let learned = imitate(
        model,
        &reference,
        &arm,
        &fixture.trace.normalization,
        start.clone(),
    )
    .unwrap();
    let oracle = oracle_imitate(&reference, &arm, &fixture.trace.normalization, start).unwrap();
    let within_oracle = learned.tracking_mse_percent <= 3.0 * oracle.tracking_mse_percent;
    let absolute = learned.tracking_mse_percent < 2.0;
    verdict(
        "6 (imitation)",
        within_oracle && absolute,
        &format!(
            "learned {:.3}% vs oracle {:.4}% (<= 3x: {}), absolute < 2%: {}",
            learned.tracking_mse_percent,
            oracle.tracking_mse_percent,
            within_oracle,
            absolute
        ),
    );
}

#[test]
fn criterion_7_comparison_orderings() {
    let fixture = &*DESK;
    // method x case score samples over 5 repetitions; the MM-VAEs are the
    // shared desk models, the baselines retrain per repetition
    let methods = ["mmvae", "vanilla", "vanilla-aug", "fwd-inv"];
    let mut scores = vec![vec![Vec::new(); ALL_CASES.len()]; methods.len()];
    for (rep, &seed) in SEEDS.iter().enumerate() {
        let profile = ComparisonProfile::desk(seed);
        let (vanilla, _) = train_vanilla(
            &fixture.data,
            VanillaMode::ZeroDropout,
            &profile.vanilla,
            profile.dropout_probability,
        )
        .unwrap();
        let (vanilla_aug, _) = train_vanilla(
            &fixture.data,
            VanillaMode::Augmented,
            &profile.vanilla,
            profile.dropout_probability,
        )
        .unwrap();
        let (forward, inverse) = train_fwd_inv(&fixture.data, &profile.fwd_inv).unwrap();
        let models = ModelSet {
            mmvae: clone_model(&fixture.models[rep]),
            vanilla,
            vanilla_aug,
            forward,
            inverse,
        };
        for (mi, method) in methods.iter().enumerate() {
            for (ci, &case) in ALL_CASES.iter().enumerate() {
                scores[mi][ci].push(evaluate_case(&models, &fixture.data, case, method).unwrap());
            }
        }
    }
    let median =
        |mi: usize, ci: usize| -> f64 { quartiles(&scores[mi][ci]).unwrap().median };
    let (mm, va, aug, fi) = (0, 1, 2, 3);
    let (fwd_c, inv_c, imi_c) = (0, 1, 2);

    let a = (0..3).all(|c| median(aug, c) < median(va, c));
    let b = (0..3).all(|c| median(mm, c) < median(va, c));
    let c_fwd = [mm, va, aug].iter().all(|&m| median(fi, fwd_c) < median(m, fwd_c));
    let c_inv = [mm, va, aug].iter().all(|&m| median(fi, inv_c) < median(m, inv_c));
    let d = median(mm, imi_c) < median(fi, imi_c);

    let mut table = String::new();
    for (mi, method) in methods.iter().enumerate() {
        table += &format!(
            " {}: fwd {:.2}% inv {:.2}% imi {:.2}%;",
            method,
            median(mi, fwd_c),
            median(mi, inv_c),
            median(mi, imi_c)
        );
    }
    verdict(
        "7 (comparison orderings)",
        a && b && c_fwd && c_inv && d,
        &format!(
            "(a) aug<vanilla all cases: {}; (b) mmvae<vanilla all cases: {}; (c) fwd wins: {}, inv wins: {}; (d) mmvae<chain on imitation: {}; medians:{}",
            a, b, c_fwd, c_inv, d, table
        ),
    );
}

#[test]
fn criterion_8_determinism_and_persistence() {
    let fixture = &*DESK;
    // fixed seed reproduces the loss history bit-for-bit
    let config = TrainConfig {
        steps: 400,
        ..TrainConfig::desk(31)
    };
    let mut a = MmVae::new(31);
    let ha = a.train(&fixture.data, &config).unwrap();
    let mut b = MmVae::new(31);
    let hb = b.train(&fixture.data, &config).unwrap();
    let history_same = ha.len() == hb.len()
        && ha
            .iter()
            .zip(&hb)
            .all(|(x, y)| x.total.to_bits() == y.total.to_bits());

    // checkpoint round-trip gives bitwise-identical outputs on a probe batch
    let model = &fixture.models[0];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.mmvc");
    let params = model.store.flatten();
    let meta = CheckpointMeta {
        kind: "mmvae".to_string(),
        init_seed: model.init_seed,
        config_hash: "acceptance".to_string(),
        sidecar: String::new(),
        param_count: params.len(),
    };
    save_checkpoint(&path, &meta, &params).unwrap();
    let (meta_back, params_back) = load_checkpoint(&path).unwrap();
    let mut restored = MmVae::new(meta_back.init_seed);
    restored.store.unflatten(&params_back).unwrap();

    let (probe, _) = fixture.data.test_matrices(MaskPattern::VisionPlusPrevQ).unwrap();
    let before = model.reconstruct(&probe, LatentMode::Mean).unwrap();
    let after = restored.reconstruct(&probe, LatentMode::Mean).unwrap();
    let bitwise = before
        .mean
        .data()
        .iter()
        .zip(after.mean.data())
        .all(|(x, y)| x.to_bits() == y.to_bits())
        && before
            .variance
            .data()
            .iter()
            .zip(after.variance.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());

    verdict(
        "8 (determinism & persistence)",
        history_same && bitwise,
        &format!(
            "loss history bitwise-identical: {}; checkpoint round-trip bitwise-identical: {}",
            history_same, bitwise
        ),
    );
}
