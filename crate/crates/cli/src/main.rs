//! Pipeline entry point: babble, dataset, train, eval, predict, rollout,
//! imitate, compare and export-plots, all driven by one TOML config plus
//! flag overrides. Every artifact embeds the producing config hash;
//! consumers refuse mixed hashes unless --force.

use clap::{Parser, Subcommand};
use mmvae_core::arm::{babble_rows, ArmState, BabbleTrace, RAW_DIMS};
use mmvae_core::baselines::{compare, ComparisonProfile, VanillaMode, VanillaVae};
use mmvae_core::config::{ModelKind, RunConfig};
use mmvae_core::dataset::{augment, make_samples, split, MaskPattern, SplitDataset};
use mmvae_core::error::{Error, Result};
use mmvae_core::io;
use mmvae_core::linalg::Matrix;
use mmvae_core::model::MmVae;
use mmvae_core::tasks::{
    eval_reconstruction, imitate, mse_percent, oracle_imitate, predict_next, rollout,
    MetricReport,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mmvae", about = "Multimodal sensorimotor VAE pipeline")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides config and the MMVAE_OUT variable).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Accept artifacts whose config hash does not match.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a motor-babbling trace (CSV + binary + normalization).
    Babble {
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Build the mask-augmented dataset files.
    Dataset,
    /// Train a model and write its checkpoint plus loss history.
    Train {
        #[arg(long)]
        model: Option<String>,
    },
    /// Score reconstruction under one mask pattern.
    Eval {
        #[arg(long)]
        pattern: String,
        #[arg(long)]
        model: Option<String>,
    },
    /// Single-step prediction from a held-out row.
    Predict {
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Iterated prediction over a held-out swing.
    Rollout {
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, default_value_t = 2)]
        start: usize,
    },
    /// Closed-loop imitation of a reference vision trajectory.
    Imitate {
        #[arg(long)]
        reference: PathBuf,
    },
    /// Train and score all methods over repeated seeds.
    Compare {
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Write plotting CSVs (loss curve, rollout, imitation trajectories).
    ExportPlots,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e);
            std::process::exit(2);
        }
    }
}

struct Pipeline {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    force: bool,
}

impl Pipeline {
    fn build(cli: &Cli) -> Result<Pipeline> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::from_toml_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(out) = &cli.out {
            config.output_dir = out.display().to_string();
        }
        let out = PathBuf::from(&config.output_dir);
        std::fs::create_dir_all(&out).map_err(|e| Error::Format {
            path: out.display().to_string(),
            reason: e.to_string(),
        })?;
        let hash = config.hash();
        Ok(Pipeline {
            config,
            hash,
            out,
            force: cli.force,
        })
    }

    fn trace(&self) -> Result<BabbleTrace> {
        babble_rows(&self.config.arm, self.config.dataset.rows, self.config.seed)
    }

    fn data(&self, trace: &BabbleTrace) -> Result<SplitDataset> {
        let samples = make_samples(trace)?;
        split(
            augment(&samples)?,
            self.config.dataset.split_ratio,
            self.config.seed,
        )
    }

    /// A held-out swing sharing the plant but not the babbling seed,
    /// normalized with the training normalization.
    fn held_out(&self, trace: &BabbleTrace) -> Result<(BabbleTrace, Vec<[f64; RAW_DIMS]>)> {
        let held = babble_rows(
            &self.config.arm,
            3 * self.config.arm.cycle_steps,
            self.config.seed.wrapping_add(0x0ff5e7),
        )?;
        let rows = held
            .rows
            .iter()
            .map(|r| trace.normalization.normalize_row(r))
            .collect();
        Ok((held, rows))
    }

    fn check_hash(&self, found: &str, what: &Path) -> Result<()> {
        if found != self.hash && !self.force {
            return Err(Error::Config(format!(
                "{} was produced by config {} but the current config hashes to {}; \
                 pass --force to use it anyway",
                what.display(),
                found,
                self.hash
            )));
        }
        Ok(())
    }

    fn checkpoint_path(&self, kind: &str) -> PathBuf {
        self.out.join(format!("{}.mmvc", kind))
    }

    fn save_model(&self, kind: &str, init_seed: u64, params: Vec<f64>) -> Result<PathBuf> {
        let path = self.checkpoint_path(kind);
        let meta = io::CheckpointMeta {
            kind: kind.to_string(),
            init_seed,
            config_hash: self.hash.clone(),
            sidecar: "normalization.json".to_string(),
            param_count: params.len(),
        };
        io::save_checkpoint(&path, &meta, &params)?;
        Ok(path)
    }

    fn load_mmvae(&self) -> Result<MmVae> {
        let path = self.checkpoint_path("mmvae");
        let (meta, params) = io::load_checkpoint(&path)?;
        self.check_hash(&meta.config_hash, &path)?;
        if meta.kind != "mmvae" {
            return Err(Error::Config(format!(
                "{} holds a {:?} model, expected mmvae",
                path.display(),
                meta.kind
            )));
        }
        let mut model = MmVae::new(meta.init_seed);
        model.store.unflatten(&params)?;
        Ok(model)
    }

    fn load_vanilla(&self, kind: &str) -> Result<VanillaVae> {
        let path = self.checkpoint_path(kind);
        let (meta, params) = io::load_checkpoint(&path)?;
        self.check_hash(&meta.config_hash, &path)?;
        let mode = match kind {
            "vanilla" => VanillaMode::ZeroDropout,
            _ => VanillaMode::Augmented,
        };
        let mut model = VanillaVae::new(mode, meta.init_seed);
        model.store.unflatten(&params)?;
        Ok(model)
    }
}

#[derive(Serialize)]
struct EvalReport {
    pattern: String,
    model: String,
    report: MetricReport,
    seed: u64,
    config_hash: String,
    config: RunConfig,
}

fn run(cli: Cli) -> Result<()> {
    let p = Pipeline::build(&cli)?;
    match &cli.command {
        Command::Babble { rows } => {
            let mut config = p.config.clone();
            if let Some(rows) = rows {
                config.dataset.rows = *rows;
            }
            let hash = config.hash();
            let trace = babble_rows(&config.arm, config.dataset.rows, config.seed)?;
            io::write_trace_csv(&p.out.join("trace.csv"), &trace.rows, &hash)?;
            let m = Matrix::from_rows(
                &trace.rows.iter().map(|r| r.to_array().to_vec()).collect::<Vec<_>>(),
            )?;
            io::write_matrix_binary(&p.out.join("trace.bin"), &m)?;
            io::write_normalization_sidecar(
                &p.out.join("normalization.json"),
                &trace.normalization,
                &hash,
            )?;
            println!(
                "wrote {} rows to {}",
                trace.rows.len(),
                p.out.join("trace.csv").display()
            );
        }
        Command::Dataset => {
            let trace = p.trace()?;
            let samples = make_samples(&trace)?;
            let ds = augment(&samples)?;
            let inputs = Matrix::from_rows(
                &ds.inputs.iter().map(|s| s.0.to_vec()).collect::<Vec<_>>(),
            )?;
            let ids: Vec<u8> = ds.patterns.iter().map(|pt| pt.id()).collect();
            io::write_dataset_csv(&p.out.join("dataset.csv"), &inputs, &ids, &p.hash)?;
            let mut with_ids = Matrix::zeros(inputs.rows(), inputs.cols() + 1);
            for r in 0..inputs.rows() {
                for c in 0..inputs.cols() {
                    with_ids.set(r, c, inputs.get(r, c));
                }
                with_ids.set(r, inputs.cols(), ids[r] as f64);
            }
            io::write_matrix_binary(&p.out.join("dataset.bin"), &with_ids)?;
            io::write_normalization_sidecar(
                &p.out.join("normalization.json"),
                &trace.normalization,
                &p.hash,
            )?;
            println!("wrote {} augmented rows", inputs.rows());
        }
        Command::Train { model } => {
            let kind = match model {
                Some(m) => ModelKind::parse(m)?,
                None => p.config.model,
            };
            let trace = p.trace()?;
            let data = p.data(&trace)?;
            io::write_normalization_sidecar(
                &p.out.join("normalization.json"),
                &trace.normalization,
                &p.hash,
            )?;
            let train_config = p.config.train_config();
            match kind {
                ModelKind::Mmvae => {
                    let mut m = MmVae::new(p.config.seed);
                    let history = m.train(&data, &train_config)?;
                    io::write_loss_csv(&p.out.join("mmvae_loss.csv"), &history, &p.hash)?;
                    let path = p.save_model("mmvae", p.config.seed, m.store.flatten())?;
                    println!("wrote {}", path.display());
                }
                ModelKind::Vanilla | ModelKind::VanillaAug => {
                    let (mode, name) = match kind {
                        ModelKind::Vanilla => (VanillaMode::ZeroDropout, "vanilla"),
                        _ => (VanillaMode::Augmented, "vanilla-aug"),
                    };
                    let (m, history) =
                        mmvae_core::baselines::train_vanilla(&data, mode, &train_config, 0.3)?;
                    write_scalar_loss_csv(&p.out.join(format!("{}_loss.csv", name)), &history, &p.hash)?;
                    let path = p.save_model(name, p.config.seed, m.store.flatten())?;
                    println!("wrote {}", path.display());
                }
                ModelKind::Fwdinv => {
                    let mut cfg = ComparisonProfile::desk(p.config.seed).fwd_inv;
                    p.config.train.apply(&mut cfg);
                    let (fwd, inv) = mmvae_core::baselines::train_fwd_inv(&data, &cfg)?;
                    let fp = p.save_model("forward", fwd.init_seed, fwd.store.flatten())?;
                    let ip = p.save_model("inverse", inv.init_seed, inv.store.flatten())?;
                    println!("wrote {} and {}", fp.display(), ip.display());
                }
            }
        }
        Command::Eval { pattern, model } => {
            let pattern = MaskPattern::parse(pattern)?;
            let kind = match model {
                Some(m) => ModelKind::parse(m)?,
                None => ModelKind::Mmvae,
            };
            let trace = p.trace()?;
            let data = p.data(&trace)?;
            let report = match kind {
                ModelKind::Mmvae => {
                    let m = p.load_mmvae()?;
                    eval_reconstruction(&m, &data, pattern)?
                }
                ModelKind::Vanilla | ModelKind::VanillaAug => {
                    let name = if kind == ModelKind::Vanilla { "vanilla" } else { "vanilla-aug" };
                    let m = p.load_vanilla(name)?;
                    let (mut inputs, targets) = data.test_matrices(pattern)?;
                    let missing = m.missing_value();
                    if missing != mmvae_core::dataset::MASK_VALUE {
                        for v in inputs.data_mut() {
                            if *v == mmvae_core::dataset::MASK_VALUE {
                                *v = missing;
                            }
                        }
                    }
                    let mean = m.reconstruct_mean(&inputs)?;
                    MetricReport::from_matrices(&mean, &targets)?
                }
                ModelKind::Fwdinv => {
                    return Err(Error::Input(
                        "eval scores reconstruction models; use compare for fwdinv".into(),
                    ))
                }
            };
            let out = EvalReport {
                pattern: format!("{:?}", pattern),
                model: kind.as_str().to_string(),
                report,
                seed: p.config.seed,
                config_hash: p.hash.clone(),
                config: p.config.clone(),
            };
            let path = p.out.join(format!("eval_{}.json", kind.as_str()));
            io::write_json(&path, &out)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Predict { index } => {
            let m = p.load_mmvae()?;
            let trace = p.trace()?;
            let (_, rows) = p.held_out(&trace)?;
            let prev = rows.get(*index).ok_or_else(|| {
                Error::Input(format!("row {} out of range ({} rows)", index, rows.len()))
            })?;
            let (mean, variance) = predict_next(&m, prev)?;
            let out = serde_json::json!({
                "index": index,
                "mean": mean.to_vec(),
                "variance": variance.to_vec(),
                "config_hash": p.hash,
            });
            io::write_json(&p.out.join("predict.json"), &out)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Rollout { horizon, start } => {
            let m = p.load_mmvae()?;
            let trace = p.trace()?;
            let (_, rows) = p.held_out(&trace)?;
            if start + horizon + 1 > rows.len() {
                return Err(Error::Input(format!(
                    "start {} + horizon {} exceeds the held-out swing ({} rows)",
                    start,
                    horizon,
                    rows.len()
                )));
            }
            let r = rollout(&m, &rows[*start], *horizon)?;
            let pred = Matrix::from_rows(
                &r.means.iter().map(|b| b[4..8].to_vec()).collect::<Vec<_>>(),
            )?;
            let truth = Matrix::from_rows(
                &rows[start + 1..start + 1 + horizon]
                    .iter()
                    .map(|b| b[4..8].to_vec())
                    .collect::<Vec<_>>(),
            )?;
            io::write_trajectory_csv(&p.out.join("rollout.csv"), &truth, &pred, &p.hash)?;
            let score = mse_percent(&pred, &truth, &[0, 1, 2, 3])?;
            let out = serde_json::json!({
                "horizon": horizon,
                "start": start,
                "vision_mse_percent": score,
                "config_hash": p.hash,
            });
            io::write_json(&p.out.join("rollout.json"), &out)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Imitate { reference } => {
            let m = p.load_mmvae()?;
            let trace = p.trace()?;
            let (rows, hash) = io::read_trace_csv(reference)?;
            if let Some(found) = hash {
                p.check_hash(&found, reference)?;
            }
            if rows.is_empty() {
                return Err(Error::Input(format!(
                    "reference {} holds no rows",
                    reference.display()
                )));
            }
            let reference_v: Vec<[f64; 4]> = rows
                .iter()
                .map(|r| trace.normalization.normalize_vision(r.v))
                .collect();
            let start = ArmState::from_joints(rows[0].q, &p.config.arm);
            let learned = imitate(
                &m,
                &reference_v,
                &p.config.arm,
                &trace.normalization,
                start.clone(),
            )?;
            let oracle = oracle_imitate(&reference_v, &p.config.arm, &trace.normalization, start)?;
            io::write_trajectory_csv(
                &p.out.join("imitation.csv"),
                &learned.reference,
                &learned.executed,
                &p.hash,
            )?;
            let out = serde_json::json!({
                "steps": reference_v.len(),
                "tracking_mse_percent": learned.tracking_mse_percent,
                "oracle_mse_percent": oracle.tracking_mse_percent,
                "saturation_warning": learned.saturation_warning,
                "config_hash": p.hash,
            });
            io::write_json(&p.out.join("imitate.json"), &out)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Compare { reps } => {
            let trace = p.trace()?;
            let data = p.data(&trace)?;
            let mut profile = ComparisonProfile::desk(p.config.seed);
            p.config.train.apply(&mut profile.mmvae);
            p.config.train.apply(&mut profile.vanilla);
            p.config.train.apply(&mut profile.fwd_inv);
            let table = compare(&data, &profile, *reps)?;
            std::fs::write(p.out.join("comparison.csv"), table.to_csv(&p.hash)).map_err(|e| {
                Error::Format {
                    path: p.out.join("comparison.csv").display().to_string(),
                    reason: e.to_string(),
                }
            })?;
            std::fs::write(p.out.join("comparison.md"), table.to_markdown()).map_err(|e| {
                Error::Format {
                    path: p.out.join("comparison.md").display().to_string(),
                    reason: e.to_string(),
                }
            })?;
            std::fs::write(p.out.join("raw_scores.jsonl"), table.raw_json_lines()?).map_err(
                |e| Error::Format {
                    path: p.out.join("raw_scores.jsonl").display().to_string(),
                    reason: e.to_string(),
                },
            )?;
            print!("{}", table.to_markdown());
        }
        Command::ExportPlots => {
            let m = p.load_mmvae()?;
            let trace = p.trace()?;
            let (held, rows) = p.held_out(&trace)?;
            let plots = p.out.join("plots");
            std::fs::create_dir_all(&plots).map_err(|e| Error::Format {
                path: plots.display().to_string(),
                reason: e.to_string(),
            })?;
            // rollout trajectory
            let start = 2;
            let horizon = 50.min(rows.len() - start - 1);
            let r = rollout(&m, &rows[start], horizon)?;
            let pred = Matrix::from_rows(
                &r.means.iter().map(|b| b[4..8].to_vec()).collect::<Vec<_>>(),
            )?;
            let truth = Matrix::from_rows(
                &rows[start + 1..start + 1 + horizon]
                    .iter()
                    .map(|b| b[4..8].to_vec())
                    .collect::<Vec<_>>(),
            )?;
            io::write_trajectory_csv(&plots.join("rollout.csv"), &truth, &pred, &p.hash)?;
            // imitation trajectory against the held-out swing
            let reference_v: Vec<[f64; 4]> = rows.iter().map(|b| [b[4], b[5], b[6], b[7]]).collect();
            let start_state = ArmState::from_joints(held.rows[0].q, &p.config.arm);
            let learned = imitate(
                &m,
                &reference_v,
                &p.config.arm,
                &trace.normalization,
                start_state,
            )?;
            io::write_trajectory_csv(
                &plots.join("imitation.csv"),
                &learned.reference,
                &learned.executed,
                &p.hash,
            )?;
            println!("wrote {}", plots.display());
        }
    }
    Ok(())
}

fn write_scalar_loss_csv(path: &Path, history: &[f64], config_hash: &str) -> Result<()> {
    let mut text = format!("# config_hash={}\nstep,total\n", config_hash);
    for (step, total) in history.iter().enumerate() {
        text += &format!("{},{:.17e}\n", step, total);
    }
    std::fs::write(path, text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}
