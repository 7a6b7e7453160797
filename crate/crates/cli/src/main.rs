//! Command-line runner: Monte-Carlo experiments, predictor training and
//! result summaries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::config::load_config;
use irs_ctp::harness::scenario::{report, run_experiment, ExperimentOptions, SCENARIOS};
use irs_ctp::harness::build_training_corpus;
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{save_checkpoint, train_val, Hyper, ObLstm};
use irs_ctp::Result;

#[derive(Parser)]
#[command(name = "irs-ctp", about = "Channel tracking and prediction experiments for IRS-aided links", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment scenario and write CSV results.
    Run(RunArgs),
    /// Train the observation predictor and save a checkpoint.
    Train(TrainArgs),
    /// Summarize the CSV files in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name; see --list.
    #[arg(long, required_unless_present = "list")]
    scenario: Option<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trained-model checkpoint (for the 2sctp scenarios).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Configuration file (for the custom scenario).
    #[arg(long)]
    config: Option<PathBuf>,
    /// List the available scenarios and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Training description file (TOML).
    #[arg(long)]
    hyper: PathBuf,
    /// Where to write the model checkpoint (JSON).
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding metric CSVs from `run`.
    #[arg(long)]
    dir: PathBuf,
}

/// On-disk schema of the training description consumed by `train`.
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    tau1: usize,
    n: usize,
    epsilon: usize,
    k_layers: usize,
    l_in: usize,
    l_pred: usize,
    lr: f64,
    batch: usize,
    epochs: usize,
    /// Optional low-learning-rate refinement phase.
    #[serde(default)]
    decay_lr: Option<f64>,
    #[serde(default)]
    decay_epochs: Option<usize>,
    trajectories: usize,
    intervals_per_trajectory: usize,
    corpus_seed: u64,
    /// "special", "general", or a path to a config file.
    config: String,
}

fn resolve_config(name: &str) -> Result<SystemConfig> {
    match name {
        "special" => Ok(SystemConfig::default_special()),
        "general" => Ok(SystemConfig::default_general()),
        path => load_config(std::path::Path::new(path)),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.hyper)?;
    let file: TrainFile = toml::from_str(&text)
        .map_err(|e| irs_ctp::CtpError::Config(format!("{}: {e}", args.hyper.display())))?;
    let mut cfg = resolve_config(&file.config)?;
    cfg.n = file.n;
    cfg.tau1 = file.tau1;
    cfg.set_link_variances_to_path_loss();
    cfg.validate()?;

    let hyper = Hyper {
        tau1: file.tau1,
        n: file.n,
        epsilon: file.epsilon,
        k_layers: file.k_layers,
        l_in: file.l_in,
        l_pred: file.l_pred,
        lr: file.lr,
        batch: file.batch,
        epochs: file.epochs,
        beta1: 0.9,
        beta2: 0.999,
        eps_adam: 1e-8,
    };

    eprintln!(
        "building corpus: {} trajectories x {} intervals",
        file.trajectories, file.intervals_per_trajectory
    );
    let corpus = build_training_corpus(
        &cfg,
        file.l_in,
        file.l_pred,
        file.trajectories,
        file.intervals_per_trajectory,
        file.corpus_seed,
    )?;
    // leak-free validation: separate trajectories under a shifted seed
    let val_trajectories = (file.trajectories / 8).max(2);
    let val = build_training_corpus(
        &cfg,
        file.l_in,
        file.l_pred,
        val_trajectories,
        file.intervals_per_trajectory,
        file.corpus_seed.wrapping_add(0x5eed_0001),
    )?;

    let mut rng = SimRng::from_seed(args.seed);
    let mut model = ObLstm::new(hyper.clone(), &mut rng)?;
    model.norm_r.fit(corpus.iter().flat_map(|s| s.inputs_re.iter()));
    model.norm_i.fit(corpus.iter().flat_map(|s| s.inputs_im.iter()));
    model.fit_output_scales(
        corpus.iter().map(|s| &s.labels_re),
        corpus.iter().map(|s| &s.labels_im),
    );
    eprintln!(
        "training {} samples ({} validation), {} epochs at lr {}",
        corpus.len(),
        val.len(),
        hyper.epochs,
        hyper.lr
    );
    let mut report = train_val(&mut model, &corpus, &val, &hyper, &mut rng)?;
    if let (Some(lr), Some(epochs)) = (file.decay_lr, file.decay_epochs) {
        let mut phase2 = hyper.clone();
        phase2.lr = lr;
        phase2.epochs = epochs;
        eprintln!("refining: {epochs} epochs at lr {lr}");
        let more = train_val(&mut model, &corpus, &val, &phase2, &mut rng)?;
        report.train_loss.extend(more.train_loss);
        report.val_loss.extend(more.val_loss);
    }

    save_checkpoint(&args.checkpoint, &model)?;
    let loss_path = args.checkpoint.with_extension("loss.csv");
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        text.push_str(&format!("{},{},{}\n", i + 1, t, v));
    }
    std::fs::write(&loss_path, text)?;
    eprintln!(
        "checkpoint: {} | loss history: {} | final val loss {:.4e}",
        args.checkpoint.display(),
        loss_path.display(),
        report.val_loss.last().unwrap()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    if args.list {
        for (name, desc) in SCENARIOS {
            println!("{name:<16} {desc}");
        }
        return Ok(());
    }
    let config = match &args.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let opts = ExperimentOptions {
        trials: args.trials,
        seed: args.seed,
        out_dir: args.out.clone(),
        checkpoint: args.checkpoint.clone(),
        config,
    };
    let scenario = args.scenario.as_deref().expect("clap enforces presence");
    let files = run_experiment(scenario, &opts)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Train(args) => cmd_train(args),
        Command::Report(args) => report(&args.dir).map(|text| println!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
