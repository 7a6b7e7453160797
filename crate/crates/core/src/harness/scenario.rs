//! Named experiment presets, CSV output and run manifests.
//!
//! Each scenario writes one CSV per metric curve with the columns
//! `interval,mean,std,trials`, plus a `manifest.txt` recording the
//! scenario, master seed, trial count, crate version and a hash of every
//! configuration used. Output is byte-identical under a fixed master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::channel::SystemConfig;
use crate::error::{CtpError, Result};
use crate::harness::{
    aggregate, anmse_series, monte_carlo_first_stage, run_first_stage, run_two_stage_trial,
    training_overhead, CurveStat, LstmPredictor, ProtocolSchedule, StageSetup, TrackerKind,
    STREAM_CHANNEL, STREAM_NOISE,
};
use crate::measurement::ReferenceKind;
use crate::numerics::SimRng;
use crate::predictor::{load_checkpoint, ObLstm, Strategy};

/// How many intervals the tracking presets simulate.
const PRESET_INTERVALS: usize = 30;

/// Options shared by every scenario run.
#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Trained-model checkpoint (required by the two-stage scenarios).
    pub checkpoint: Option<PathBuf>,
    /// Custom configuration (required by the `custom` scenario).
    pub config: Option<SystemConfig>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 1,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            config: None,
        }
    }
}

pub const SCENARIOS: &[(&str, &str)] = &[
    ("fig6", "special case: NMSE vs interval for tau1 in {2, 6, 10}"),
    ("fig7", "special case: ANMSE, DFT vs random reference matrix, tau1 = 6"),
    ("fig11", "general case: NMSE vs interval for tau1 in {2, 4, 6, 8}, CGA-II"),
    ("cga-compare", "general case: CGA-I vs CGA-II at tau1 = 6"),
    ("2sctp-special", "two-stage protocol vs continued tracking, special case (needs --checkpoint)"),
    ("2sctp-general", "two-stage protocol vs continued tracking, general case (needs --checkpoint)"),
    ("overhead", "pilot-slot accounting for the reference schedules"),
    ("custom", "first-stage tracking on a user configuration (needs --config)"),
];

fn write_curve_csv(path: &Path, stats: &[CurveStat]) -> Result<()> {
    let mut text = String::from("interval,mean,std,trials\n");
    for s in stats {
        writeln!(text, "{},{},{},{}", s.interval, s.mean, s.std, s.trials)
            .expect("string formatting cannot fail");
    }
    fs::write(path, text)?;
    Ok(())
}

fn config_hash(cfg: &SystemConfig) -> Result<String> {
    let file = super::config::ConfigFile::from_system_config(cfg);
    let text = toml::to_string(&file).map_err(|e| CtpError::Config(format!("{e}")))?;
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").expect("string formatting cannot fail");
    }
    Ok(hex)
}

fn write_manifest(
    out: &Path,
    scenario: &str,
    opts: &ExperimentOptions,
    configs: &[&SystemConfig],
    files: &[PathBuf],
) -> Result<PathBuf> {
    let mut text = String::new();
    writeln!(text, "scenario = {scenario}").unwrap();
    writeln!(text, "seed = {}", opts.seed).unwrap();
    writeln!(text, "trials = {}", opts.trials).unwrap();
    writeln!(text, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    for (i, cfg) in configs.iter().enumerate() {
        writeln!(text, "config_hash_{i} = {}", config_hash(cfg)?).unwrap();
    }
    for f in files {
        writeln!(text, "output = {}", f.file_name().unwrap().to_string_lossy()).unwrap();
    }
    let path = out.join("manifest.txt");
    fs::write(&path, text)?;
    Ok(path)
}

fn tracking_sweep(
    out: &Path,
    cfg_base: &SystemConfig,
    tracker: TrackerKind,
    tau1_values: &[usize],
    opts: &ExperimentOptions,
) -> Result<(Vec<PathBuf>, Vec<SystemConfig>)> {
    let mut files = Vec::new();
    let mut configs = Vec::new();
    for &tau1 in tau1_values {
        let cfg = cfg_base.clone().with_pilot_slots(tau1);
        let curves = monte_carlo_first_stage(
            &cfg,
            ReferenceKind::Dft,
            tracker,
            PRESET_INTERVALS,
            opts.trials,
            opts.seed,
        )?;
        let stats = aggregate(&curves);
        let path = out.join(format!("nmse_tau{tau1}.csv"));
        write_curve_csv(&path, &stats)?;
        files.push(path);
        configs.push(cfg);
    }
    Ok((files, configs))
}

fn reference_compare(
    out: &Path,
    cfg: &SystemConfig,
    opts: &ExperimentOptions,
) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for (kind, name) in [
        (ReferenceKind::Dft, "dft"),
        (ReferenceKind::Random, "random"),
    ] {
        let curves = monte_carlo_first_stage(
            cfg,
            kind,
            TrackerKind::SpecialStatistical,
            PRESET_INTERVALS,
            opts.trials,
            opts.seed,
        )?;
        let anmse_curves: Vec<Vec<f64>> = curves.iter().map(|c| anmse_series(c)).collect();
        let path = out.join(format!("anmse_{name}.csv"));
        write_curve_csv(&path, &aggregate(&anmse_curves))?;
        files.push(path);
    }
    Ok(files)
}

fn two_stage_compare(
    out: &Path,
    cfg_base: &SystemConfig,
    tracker: TrackerKind,
    opts: &ExperimentOptions,
) -> Result<(Vec<PathBuf>, SystemConfig)> {
    let ckpt = opts.checkpoint.as_ref().ok_or_else(|| {
        CtpError::Config("this scenario needs --checkpoint <trained model>".into())
    })?;
    let model: ObLstm = load_checkpoint(ckpt)?;
    let strategy = if model.hyper.l_pred == 1 {
        Strategy::B
    } else {
        Strategy::A
    };
    let mut cfg = cfg_base.clone();
    cfg.n = model.hyper.n;
    cfg.tau1 = model.hyper.tau1;
    cfg.t1 = model.hyper.l_in;
    cfg.t2 = match strategy {
        Strategy::A => model.hyper.l_pred,
        Strategy::B => cfg.t2.max(1),
    };
    cfg.set_link_variances_to_path_loss();
    let predictor = LstmPredictor {
        model,
        strategy,
    };

    let mut nmse_2sctp = Vec::with_capacity(opts.trials);
    let mut nmse_ct = Vec::with_capacity(opts.trials);
    let mut ob = Vec::with_capacity(opts.trials);
    for i in 0..opts.trials {
        let trial_seed = opts.seed ^ i as u64;
        let mut ref_rng = SimRng::from_seed(trial_seed).derive(super::STREAM_REFERENCE);
        let setup = StageSetup::new(cfg.clone(), ReferenceKind::Dft, tracker, &mut ref_rng)?;
        let trial = run_two_stage_trial(&setup, &predictor, trial_seed)?;
        nmse_2sctp.push(trial.nmse);
        ob.push(trial.ob_nmse);

        let base = SimRng::from_seed(trial_seed);
        let mut ch = base.derive(STREAM_CHANNEL);
        let mut nz = base.derive(STREAM_NOISE);
        let ct = run_first_stage(&setup, cfg.t1 + cfg.t2, &mut ch, &mut nz)?;
        nmse_ct.push(ct.records.iter().map(|r| r.nmse).collect());
    }
    let mut files = Vec::new();
    for (name, curves) in [
        ("nmse_2sctp", &nmse_2sctp),
        ("nmse_ct", &nmse_ct),
        ("obnmse", &ob),
    ] {
        let path = out.join(format!("{name}.csv"));
        write_curve_csv(&path, &aggregate(curves))?;
        files.push(path);
    }
    Ok((files, cfg))
}

fn overhead_table(out: &Path, cfg: &SystemConfig) -> Result<PathBuf> {
    let total = 3600;
    let rows: Vec<(String, usize)> = vec![
        (
            "2sctp_cycling_t1_6_t2_6".into(),
            training_overhead(&ProtocolSchedule {
                total,
                t1: 6,
                t2: 6,
                tau: cfg.tau,
                tau1: cfg.tau1,
                cycling: true,
            }),
        ),
        (
            "2sctp_cycling_t1_6_t2_3".into(),
            training_overhead(&ProtocolSchedule {
                total,
                t1: 6,
                t2: 3,
                tau: cfg.tau,
                tau1: cfg.tau1,
                cycling: true,
            }),
        ),
        (
            "ct".into(),
            training_overhead(&ProtocolSchedule {
                total,
                t1: total,
                t2: 0,
                tau: cfg.tau,
                tau1: cfg.tau1,
                cycling: false,
            }),
        ),
        (
            "ce".into(),
            training_overhead(&ProtocolSchedule {
                total,
                t1: total,
                t2: 0,
                tau: cfg.tau.max(cfg.n + 1),
                tau1: cfg.n + 1,
                cycling: false,
            }),
        ),
    ];
    let mut text = String::from("scheme,pilot_slots\n");
    for (name, slots) in rows {
        writeln!(text, "{name},{slots}").unwrap();
    }
    let path = out.join("overhead.csv");
    fs::write(&path, text)?;
    Ok(path)
}

/// Run a named scenario and return the list of files written.
pub fn run_experiment(scenario: &str, opts: &ExperimentOptions) -> Result<Vec<PathBuf>> {
    if opts.trials == 0 {
        return Err(CtpError::InvalidArgument("trials must be positive".into()));
    }
    fs::create_dir_all(&opts.out_dir)?;
    let out = opts.out_dir.clone();
    let special = SystemConfig::default_special();
    let general = SystemConfig::default_general();

    let (mut files, configs): (Vec<PathBuf>, Vec<SystemConfig>) = match scenario {
        "fig6" => {
            let (files, cfgs) = tracking_sweep(
                &out,
                &special,
                TrackerKind::SpecialStatistical,
                &[2, 6, 10],
                opts,
            )?;
            (files, cfgs)
        }
        "fig7" => {
            let cfg = special.clone().with_pilot_slots(6);
            (reference_compare(&out, &cfg, opts)?, vec![cfg])
        }
        "fig11" => {
            let (files, cfgs) = tracking_sweep(
                &out,
                &general,
                TrackerKind::GeneralCga2,
                &[2, 4, 6, 8],
                opts,
            )?;
            (files, cfgs)
        }
        "cga-compare" => {
            let cfg = general.clone().with_pilot_slots(6);
            let mut files = Vec::new();
            for (tracker, name) in [
                (TrackerKind::GeneralCga1, "cga1"),
                (TrackerKind::GeneralCga2, "cga2"),
            ] {
                let curves = monte_carlo_first_stage(
                    &cfg,
                    ReferenceKind::Dft,
                    tracker,
                    PRESET_INTERVALS,
                    opts.trials,
                    opts.seed,
                )?;
                let path = out.join(format!("nmse_{name}.csv"));
                write_curve_csv(&path, &aggregate(&curves))?;
                files.push(path);
            }
            (files, vec![cfg])
        }
        "2sctp-special" => {
            let (files, cfg) =
                two_stage_compare(&out, &special, TrackerKind::SpecialStatistical, opts)?;
            (files, vec![cfg])
        }
        "2sctp-general" => {
            let (files, cfg) = two_stage_compare(&out, &general, TrackerKind::GeneralCga2, opts)?;
            (files, vec![cfg])
        }
        "overhead" => (vec![overhead_table(&out, &special)?], vec![special.clone()]),
        "custom" => {
            let cfg = opts.config.clone().ok_or_else(|| {
                CtpError::Config("the custom scenario needs --config <file>".into())
            })?;
            let tracker = if cfg.alpha_ia == 0.0 {
                TrackerKind::SpecialStatistical
            } else {
                TrackerKind::GeneralCga2
            };
            let curves = monte_carlo_first_stage(
                &cfg,
                ReferenceKind::Dft,
                tracker,
                PRESET_INTERVALS.max(cfg.t1),
                opts.trials,
                opts.seed,
            )?;
            let nmse_path = out.join("nmse.csv");
            write_curve_csv(&nmse_path, &aggregate(&curves))?;
            let anmse_curves: Vec<Vec<f64>> = curves.iter().map(|c| anmse_series(c)).collect();
            let anmse_path = out.join("anmse.csv");
            write_curve_csv(&anmse_path, &aggregate(&anmse_curves))?;
            (vec![nmse_path, anmse_path], vec![cfg])
        }
        other => {
            return Err(CtpError::Config(format!(
                "unknown scenario '{other}'; available: {}",
                SCENARIOS
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        }
    };

    let config_refs: Vec<&SystemConfig> = configs.iter().collect();
    files.push(write_manifest(&out, scenario, opts, &config_refs, &files.clone())?);
    Ok(files)
}

/// Summarize the metric CSVs in a directory: per file, the converged level
/// (mean over the last five intervals) and the final interval's mean.
pub fn report(dir: &Path) -> Result<String> {
    let mut lines = vec![format!("{:<24} {:>12} {:>12}", "metric", "converged", "final")];
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(CtpError::Config(format!(
            "no CSV files found in {}",
            dir.display()
        )));
    }
    for path in entries {
        let text = fs::read_to_string(&path)?;
        let mut means = Vec::new();
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() >= 2 {
                if let Ok(v) = cols[1].parse::<f64>() {
                    means.push(v);
                }
            }
        }
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        if means.is_empty() {
            lines.push(format!("{name:<24} {:>12} {:>12}", "-", "-"));
            continue;
        }
        let tail = &means[means.len().saturating_sub(5)..];
        let converged = tail.iter().sum::<f64>() / tail.len() as f64;
        lines.push(format!(
            "{name:<24} {converged:>12.4e} {:>12.4e}",
            means.last().unwrap()
        ));
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("irs_ctp_scenario_{tag}"));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn small_opts(dir: PathBuf) -> ExperimentOptions {
        ExperimentOptions {
            trials: 3,
            seed: 7,
            out_dir: dir,
            checkpoint: None,
            config: None,
        }
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let opts = small_opts(temp_dir("unknown"));
        assert!(matches!(
            run_experiment("not-a-scenario", &opts),
            Err(CtpError::Config(_))
        ));
    }

    #[test]
    fn overhead_scenario_writes_expected_rows() {
        let dir = temp_dir("overhead");
        let files = run_experiment("overhead", &small_opts(dir.clone())).unwrap();
        assert!(files.iter().any(|f| f.ends_with("overhead.csv")));
        let text = fs::read_to_string(dir.join("overhead.csv")).unwrap();
        assert!(text.contains("ct,21600"));
        assert!(text.contains("ce,129600"));
        assert!(text.contains("2sctp_cycling_t1_6_t2_6,10800"));
        assert!(dir.join("manifest.txt").exists());
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_output_is_deterministic_under_fixed_seed() {
        // a downscaled fig7-style run, twice, must be byte-identical
        let dir_a = temp_dir("det_a");
        let dir_b = temp_dir("det_b");
        let mut cfg = SystemConfig::default_special().with_elements(4);
        cfg.tau1 = 2;
        for dir in [&dir_a, &dir_b] {
            let mut opts = small_opts(dir.clone());
            opts.config = Some(cfg.clone());
            run_experiment("custom", &opts).unwrap();
        }
        let a = fs::read(dir_a.join("nmse.csv")).unwrap();
        let b = fs::read(dir_b.join("nmse.csv")).unwrap();
        assert_eq!(a, b, "CSV output must be deterministic");
        fs::remove_dir_all(&dir_a).ok();
        fs::remove_dir_all(&dir_b).ok();
    }

    #[test]
    fn report_summarizes_csvs() {
        let dir = temp_dir("report");
        fs::write(
            dir.join("nmse_x.csv"),
            "interval,mean,std,trials\n1,1.0,0.1,3\n2,0.5,0.1,3\n",
        )
        .unwrap();
        let text = report(&dir).unwrap();
        assert!(text.contains("nmse_x"));
        assert!(report(&temp_dir("report_empty")).is_err());
        fs::remove_dir_all(&dir).ok();
    }
}
