//! Operator command line: dataset fitting, throw sampling, experiment
//! training, checkpoint evaluation, and experiment reporting.
//!
//! Exit codes: 0 success, 1 validation/input error, 2 runtime failure.

use clap::{Args, Parser, Subcommand};
use rallylab::config::ExperimentConfig;
use rallylab::env::sparse_eval_score;
use rallylab::human_model::{
    distribution_delta, estimate_distribution, sample_throw, BallDistribution, ClusterOptions,
    TrajectoryDataset,
};
use rallylab::metrics::HeatmapGrid;
use rallylab::pipeline::{
    eval_policy_on_source, rally_eval, run_experiment, surrogate_from_config, ExperimentDir,
};
use rallylab::policy::Checkpoint;
use rallylab::rng::{rng_from, seed_chain, tag};
use rallylab::surrogate::render_observed_trajectory;
use rallylab::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "rallylab",
    about = "Sim-to-sim table-tennis rally laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a throw distribution from an observed-trajectory dataset (JSONL).
    Fit(FitArgs),
    /// Sample synthetic throws from a distribution and render them as an
    /// observed-trajectory dataset.
    Sample(SampleArgs),
    /// Run the experiment described by a config file (resumable).
    Train(TrainArgs),
    /// Evaluate a checkpoint: sparse scores, rallies, landing heatmap.
    Eval(EvalArgs),
    /// Summarize a finished (or partial) experiment directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset, one trajectory per line.
    dataset: PathBuf,
    /// DBSCAN neighborhood radius in the z-scored feature space.
    #[arg(long, default_value_t = ClusterOptions::default().eps)]
    eps: f64,
    /// DBSCAN core-point threshold.
    #[arg(long, default_value_t = ClusterOptions::default().min_pts)]
    min_pts: usize,
    /// Output path for the fitted 16-field distribution record.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Distribution preset name (see `--list-presets`).
    #[arg(long, conflicts_with = "dist")]
    preset: Option<String>,
    /// Distribution record file (16 fields, JSON).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// List available preset names and exit.
    #[arg(long)]
    list_presets: bool,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-axis uniform observation noise half-width, m.
    #[arg(long, default_value_t = 0.010)]
    noise: f64,
    /// Rejection budget per throw.
    #[arg(long, default_value_t = 100_000)]
    max_rejects: usize,
    /// Output dataset path (JSONL).
    #[arg(long, default_value = "throws.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Write a default configuration to the --config path if it is missing,
    /// then exit.
    #[arg(long)]
    init: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Experiment configuration supplying physics, opponent, and rewards.
    #[arg(long)]
    config: PathBuf,
    /// Single-throw evaluation episodes.
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// Rallies to play.
    #[arg(long, default_value_t = 50)]
    rallies: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for the report and heatmap CSV.
    #[arg(long, default_value = "eval_out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Experiment directory produced by `train`.
    experiment: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version exits are success paths.
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

/// Validation and input problems exit 1; runtime failures exit 2.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_)
        | Error::InvalidArgument(_)
        | Error::ShapeMismatch { .. }
        | Error::TrajectoryRejected(_)
        | Error::MissingPrerequisite(_)
        | Error::CheckpointFormat(_)
        | Error::TomlParse(_)
        | Error::InfeasibleThrow(_) => 1,
        _ => 2,
    }
}

fn cmd_fit(args: FitArgs) -> rallylab::Result<()> {
    if !args.dataset.exists() {
        return Err(Error::Validation(format!(
            "dataset file not found: {}",
            args.dataset.display()
        )));
    }
    let dataset = TrajectoryDataset::load(&args.dataset)?;
    if dataset.is_empty() {
        return Err(Error::Validation("dataset is empty".into()));
    }
    let physics = rallylab::physics::PhysicsConstants::default();
    let table = rallylab::physics::TableGeometry::default();
    let opts = ClusterOptions {
        eps: args.eps,
        min_pts: args.min_pts,
    };
    let (dist, report) = estimate_distribution(&dataset, &physics, &table, &opts)?;
    let out = args
        .out
        .unwrap_or_else(|| args.dataset.with_extension("dist.json"));
    std::fs::write(&out, serde_json::to_string_pretty(&dist)?)?;
    println!(
        "fitted {} -> {} ({} trajectories: {} rejected, {} without landing, {} noise; kept cluster {} of {:?}; mean residual {:.4} m)",
        args.dataset.display(),
        out.display(),
        report.n_input,
        report.n_fit_rejected,
        report.n_no_landing,
        report.n_noise,
        report.kept_cluster,
        report.cluster_sizes,
        report.mean_residual,
    );
    for (idx, reason) in report.rejected.iter().take(10) {
        println!("  rejected #{idx}: {reason}");
    }
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> rallylab::Result<()> {
    if args.list_presets {
        for name in rallylab::presets::PRESET_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let dist: BallDistribution = match (&args.preset, &args.dist) {
        (Some(name), None) => rallylab::presets::distribution(name)?,
        (None, Some(path)) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        _ => {
            return Err(Error::Validation(
                "exactly one of --preset or --dist is required".into(),
            ))
        }
    };
    let physics = rallylab::physics::PhysicsConstants::default();
    let table = rallylab::physics::TableGeometry::default();
    dist.validate(&table)?;
    let mut render_rng = rng_from(&[args.seed, tag("sample-render")]);
    let mut trajectories = Vec::with_capacity(args.count);
    let mut attempts_total = 0usize;
    for i in 0..args.count {
        let (throw, attempts) = sample_throw(
            &dist,
            seed_chain(&[args.seed, i as u64]),
            &physics,
            &table,
            args.max_rejects,
        )?;
        attempts_total += attempts;
        trajectories.push(rallylab::human_model::TaggedTrajectory {
            player_id: "sampled".into(),
            iteration: 0,
            source: rallylab::human_model::ThrowOrigin::Bootstrap,
            trajectory: render_observed_trajectory(
                &throw.init,
                &physics,
                &table,
                args.noise,
                &mut render_rng,
            )?,
        });
    }
    let dataset = TrajectoryDataset { trajectories };
    dataset.save(&args.out)?;
    println!(
        "wrote {} throws to {} (acceptance rate {:.1}%)",
        args.count,
        args.out.display(),
        100.0 * args.count as f64 / attempts_total.max(1) as f64
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> rallylab::Result<()> {
    if args.init {
        if args.config.exists() {
            return Err(Error::Validation(format!(
                "refusing to overwrite existing config {}",
                args.config.display()
            )));
        }
        std::fs::write(&args.config, ExperimentConfig::default().to_toml()?)?;
        println!("wrote default config to {}", args.config.display());
        return Ok(());
    }
    let config = ExperimentConfig::load(&args.config)?;
    let out_dir = config.resolved_out_dir();
    let dir = ExperimentDir::create(&out_dir, &config)?;
    println!(
        "training mode {:?} into {} (live metrics under metrics/)",
        config.mode,
        out_dir.display()
    );
    let state = run_experiment(&config, Some(&dir))?;

    // Final evaluation against a fresh surrogate.
    let mut source = surrogate_from_config(
        &config,
        seed_chain(&[config.master_seed, tag("final-eval-opponent")]),
    )?;
    let env = config.env_real();
    let records = eval_policy_on_source(
        &state.theta,
        &state.normalizer,
        &env,
        &mut source,
        config.schedule.eval_episodes,
        seed_chain(&[config.master_seed, tag("final-eval")]),
        None,
    )?;
    let sparse: Vec<i32> = records.iter().map(sparse_eval_score).collect();
    let mean_sparse = sparse.iter().sum::<i32>() as f64 / sparse.len().max(1) as f64;
    let rally = rally_eval(
        &state.theta,
        &state.normalizer,
        &env,
        &mut source,
        config.rally_count,
        config.rally_cap,
        seed_chain(&[config.master_seed, tag("final-rally")]),
    )?;
    let grid = HeatmapGrid::from_records(&records, &config.table);
    let report = serde_json::json!({
        "mean_sparse_score": mean_sparse,
        "sparse_scores": sparse,
        "rally": rally,
        "models": state.models,
        "eval_scores": state.eval_scores,
    });
    let reports = out_dir.join("reports");
    std::fs::write(
        reports.join("final_eval.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    std::fs::write(reports.join("landing_heatmap.csv"), csv)?;
    println!(
        "done: mean sparse {:.3}, mean rally length {:.2} (std {:.2}), {} models fitted",
        mean_sparse,
        rally.mean,
        rally.std,
        state.models.len()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> rallylab::Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    std::fs::create_dir_all(&args.out)?;
    let env = config.env_real();
    let mut source = surrogate_from_config(&config, seed_chain(&[args.seed, tag("opponent")]))?;
    let records = eval_policy_on_source(
        &ckpt.params,
        &ckpt.normalizer,
        &env,
        &mut source,
        args.episodes,
        seed_chain(&[args.seed, tag("episodes")]),
        None,
    )?;
    let sparse: Vec<i32> = records.iter().map(sparse_eval_score).collect();
    let mean_sparse = sparse.iter().sum::<i32>() as f64 / sparse.len().max(1) as f64;
    let rally = rally_eval(
        &ckpt.params,
        &ckpt.normalizer,
        &env,
        &mut source,
        args.rallies,
        config.rally_cap,
        seed_chain(&[args.seed, tag("rallies")]),
    )?;
    let grid = HeatmapGrid::from_records(&records, &config.table);
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    std::fs::write(args.out.join("landing_heatmap.csv"), csv)?;
    let report = serde_json::json!({
        "checkpoint": args.checkpoint,
        "phase": ckpt.phase,
        "episodes": args.episodes,
        "mean_sparse_score": mean_sparse,
        "sparse_scores": sparse,
        "rally_lengths": rally.lengths,
        "rally_normalized": rally.normalized,
        "rally_censored": rally.censored,
        "rally_mean": rally.mean,
        "rally_std": rally.std,
    });
    std::fs::write(
        args.out.join("eval_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "checkpoint {} ({}): mean sparse {:.3}, mean rally {:.2} over {} rallies -> {}",
        args.checkpoint.display(),
        ckpt.phase,
        mean_sparse,
        rally.mean,
        args.rallies,
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> rallylab::Result<()> {
    let root = &args.experiment;
    if !root.join("manifest.json").exists() {
        return Err(Error::Validation(format!(
            "{} is not an experiment directory (no manifest.json)",
            root.display()
        )));
    }
    let config = ExperimentConfig::load(&root.join("config.toml"))?;
    let dir = ExperimentDir { root: root.clone() };
    let phases = dir.completed_phases();
    println!("experiment: {} (mode {:?})", root.display(), config.mode);
    println!("completed phases: {}", phases.join(", "));
    let Some(last) = phases.last() else {
        println!("no phases completed yet");
        return Ok(());
    };
    let models = dir.load_models_file(last)?;
    println!("behavior models fitted: {}", models.len());
    for (i, pair) in models.windows(2).enumerate() {
        let delta = distribution_delta(&pair[0], &pair[1]);
        println!("  delta(M{}, M{}): summary {:.4}", i, i + 1, delta.summary);
    }
    if models.len() >= 3 {
        let early = distribution_delta(&models[0], &models[1]).summary;
        let late =
            distribution_delta(&models[models.len() - 2], &models[models.len() - 1]).summary;
        println!(
            "convergence diagnostic: last delta {:.4} vs first delta {:.4} ({})",
            late,
            early,
            if late < early {
                "shrinking"
            } else {
                "not shrinking"
            }
        );
    }
    for phase in &phases {
        let path = dir.metrics_path(phase);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Some(last_line) = text.lines().last().filter(|l| !l.starts_with("iteration")) {
                println!("  {phase}: final update {last_line}");
            }
        }
    }
    let final_eval = root.join("reports").join("final_eval.json");
    if final_eval.exists() {
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&final_eval)?)?;
        if let Some(score) = report.get("mean_sparse_score") {
            println!("final mean sparse score: {score}");
        }
        if let Some(rally) = report.get("rally").and_then(|r| r.get("mean")) {
            println!("final mean rally length: {rally}");
        }
    }
    Ok(())
}
