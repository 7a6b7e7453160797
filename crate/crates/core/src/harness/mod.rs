//! Two-stage protocol orchestration, metrics and Monte-Carlo experiments.
//!
//! Stage 1: pilots are sent for `tau1` slots per interval and the filter
//! tracks the equivalent channel from real observations. Stage 2: no
//! pilots; the predictor emits imaginary observations and the same filter
//! consumes them. Trials are seeded `master ^ trial_index` and use
//! separate derived streams for channel evolution and observation noise,
//! so a stage-2 run shares its channel trajectory with the matching
//! continued-tracking run.

pub mod config;
pub mod scenario;

use std::time::{Duration, Instant};

use crate::channel::{
    derive_statistics, equivalent_channel, equivalent_covariance, equivalent_mean,
    equivalent_second_moment, evolve, init_channels, ChannelState, ChannelStatistics, LosModel,
    SystemConfig,
};
use crate::error::{CtpError, Result};
use crate::measurement::{
    measurement_matrix, observe, reference_matrix, ObsKind, ObservationBlock, ReferenceKind,
    ReferenceMatrix,
};
use crate::numerics::{CVec, SimRng};
use crate::predictor::{ObLstm, Strategy};
use crate::tracker::{
    gkf_init, gkf_step, kf_init, kf_step, CgaMode, FilterModel, KalmanState,
};

/// Derived-stream labels; channel evolution and observation noise never
/// share a stream, so removing the pilot noise does not perturb the
/// channel trajectory.
pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_REFERENCE: u64 = 3;

/// Pilot/data split of a frame of `total` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolSchedule {
    pub total: usize,
    pub t1: usize,
    pub t2: usize,
    pub tau: usize,
    pub tau1: usize,
    /// Whether the (T1, T2) pattern repeats across the frame.
    pub cycling: bool,
}

impl ProtocolSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.tau1 > self.tau {
            return Err(CtpError::InvalidArgument(format!(
                "tau1 = {} exceeds tau = {}",
                self.tau1, self.tau
            )));
        }
        if self.cycling && self.t1 + self.t2 > self.total {
            return Err(CtpError::InvalidArgument(
                "cycling schedule needs t1 + t2 <= total".into(),
            ));
        }
        Ok(())
    }

    /// Is interval `t` (1-based) a channel-training interval?
    pub fn is_training_interval(&self, t: usize) -> bool {
        if self.cycling {
            let period = self.t1 + self.t2;
            if period == 0 {
                return false;
            }
            (t - 1) % period < self.t1
        } else {
            t <= self.t1
        }
    }

    pub fn training_intervals(&self) -> usize {
        (1..=self.total)
            .filter(|&t| self.is_training_interval(t))
            .count()
    }
}

/// Number of time slots spent on pilots over the whole schedule.
pub fn training_overhead(schedule: &ProtocolSchedule) -> usize {
    schedule.training_intervals() * schedule.tau1
}

/// Number of time slots left for data transmission; pilots plus data
/// always account for every slot of the frame.
pub fn data_slots(schedule: &ProtocolSchedule) -> usize {
    schedule.total * schedule.tau - training_overhead(schedule)
}

/// Per-interval normalized squared error `||est - truth||^2 / ||truth||^2`.
pub fn nmse(estimate: &CVec, truth: &CVec) -> Result<f64> {
    let denom = truth.norm_sq();
    if denom == 0.0 {
        return Err(CtpError::InvalidArgument(
            "NMSE undefined for a zero truth vector".into(),
        ));
    }
    Ok(estimate.sub(truth).norm_sq() / denom)
}

/// Running mean of an NMSE history.
pub fn anmse(history: &[f64]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    history.iter().sum::<f64>() / history.len() as f64
}

/// Cumulative running means, entry t = ANMSE over intervals 1..=t+1.
pub fn anmse_series(history: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(history.len());
    let mut acc = 0.0;
    for (i, v) in history.iter().enumerate() {
        acc += v;
        out.push(acc / (i + 1) as f64);
    }
    out
}

/// Per-interval normalized error of predicted observations against the
/// held-out true observations.
pub fn ob_nmse(predicted: &[ObservationBlock], truth: &[ObservationBlock]) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return Err(CtpError::InvalidArgument(
            "prediction/truth horizon mismatch".into(),
        ));
    }
    predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| nmse(&p.y, &t.y))
        .collect()
}

/// Which tracking algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerKind {
    /// Special case, process noise built from the true static `|g_n|^2`.
    SpecialOracleGain,
    /// Special case, process noise built from `E|g_n|^2 = l_ia`.
    SpecialStatistical,
    /// General case, noise covariance refreshed from true per-link channels.
    GeneralCga1,
    /// General case, noise covariance refreshed from the previous estimate.
    GeneralCga2,
}

/// A configured simulation: physical setup, reference matrix and tracker.
#[derive(Debug, Clone)]
pub struct StageSetup {
    pub cfg: SystemConfig,
    pub stats: ChannelStatistics,
    pub qref: ReferenceMatrix,
    pub tracker: TrackerKind,
}

impl StageSetup {
    /// `rng` only feeds the random-kind reference matrix; the DFT kind is
    /// deterministic.
    pub fn new(
        cfg: SystemConfig,
        ref_kind: ReferenceKind,
        tracker: TrackerKind,
        rng: &mut SimRng,
    ) -> Result<Self> {
        cfg.validate()?;
        let stats = derive_statistics(&cfg, LosModel::Ura)?;
        let qref = reference_matrix(ref_kind, cfg.n, rng)?;
        Ok(Self {
            cfg,
            stats,
            qref,
            tracker,
        })
    }

    fn build_filter(&self, g_true: &CVec) -> Result<(FilterModel, KalmanState)> {
        let n = self.cfg.n;
        let mean = equivalent_mean(&self.stats);
        let has_mean = mean.norm() > 0.0;
        match self.tracker {
            TrackerKind::SpecialOracleGain | TrackerKind::SpecialStatistical => {
                let gains: Vec<f64> = match self.tracker {
                    TrackerKind::SpecialOracleGain => {
                        g_true.iter().map(|g| g.norm_sqr()).collect()
                    }
                    _ => vec![self.stats.l_ia; n],
                };
                let mut model = FilterModel::special(&self.cfg, &gains);
                let prior = if has_mean {
                    model = model.with_mean(mean);
                    equivalent_covariance(&self.stats)
                } else {
                    equivalent_second_moment(&self.stats)
                };
                let state = kf_init(&model, &prior)?;
                Ok((model, state))
            }
            TrackerKind::GeneralCga1 | TrackerKind::GeneralCga2 => {
                let model = FilterModel::general(&self.cfg);
                let prior = equivalent_second_moment(&self.stats);
                let state = gkf_init(&model, &prior)?;
                Ok((model, state))
            }
        }
    }

    fn filter_step(
        &self,
        model: &FilterModel,
        state: &KalmanState,
        obs: &ObservationBlock,
        channel: &ChannelState,
    ) -> Result<KalmanState> {
        match self.tracker {
            TrackerKind::SpecialOracleGain | TrackerKind::SpecialStatistical => {
                kf_step(state, model, obs)
            }
            TrackerKind::GeneralCga1 => gkf_step(
                state,
                model,
                obs,
                CgaMode::OracleChannels {
                    h_r: &channel.h_r,
                    g: &channel.g,
                },
            ),
            TrackerKind::GeneralCga2 => gkf_step(state, model, obs, CgaMode::EstimateOnly),
        }
    }
}

/// Everything logged about one tracked interval.
#[derive(Debug, Clone)]
pub struct IntervalRecord {
    pub t: usize,
    pub truth: CVec,
    pub estimate: CVec,
    pub nmse: f64,
    pub block: ObservationBlock,
}

/// First-stage output: per-interval records plus the carried-over filter
/// and channel state needed to continue into stage 2.
#[derive(Debug, Clone)]
pub struct FirstStage {
    pub records: Vec<IntervalRecord>,
    pub model: FilterModel,
    pub filter: KalmanState,
    pub channel: ChannelState,
}

/// Track the channel over `intervals` training intervals from a fresh
/// channel realization.
pub fn run_first_stage(
    setup: &StageSetup,
    intervals: usize,
    channel_rng: &mut SimRng,
    noise_rng: &mut SimRng,
) -> Result<FirstStage> {
    let mut channel = init_channels(&setup.stats, channel_rng)?;
    let (model, mut filter) = setup.build_filter(&channel.g)?;
    let mut records = Vec::with_capacity(intervals);
    for t in 1..=intervals {
        channel = evolve(&channel, &setup.stats, &setup.cfg, channel_rng)?;
        let truth = equivalent_channel(&channel);
        let v = measurement_matrix(t, setup.cfg.tau1, &setup.qref)?;
        let y = observe(&truth, &v, setup.cfg.tx_power, setup.cfg.noise_var, noise_rng)?;
        let block = ObservationBlock {
            y,
            v,
            t,
            kind: ObsKind::Real,
        };
        filter = setup.filter_step(&model, &filter, &block, &channel)?;
        records.push(IntervalRecord {
            t,
            truth: truth.clone(),
            estimate: filter.h.clone(),
            nmse: nmse(&filter.h, &truth)?,
            block,
        });
    }
    Ok(FirstStage {
        records,
        model,
        filter,
        channel,
    })
}

/// Supplies imaginary observations for the second stage.
pub trait ObservationPredictor {
    fn predict_blocks(
        &self,
        history: &[ObservationBlock],
        horizon: usize,
        q: &ReferenceMatrix,
    ) -> Result<Vec<ObservationBlock>>;
}

/// The trained network behind the [`ObservationPredictor`] interface.
pub struct LstmPredictor {
    pub model: ObLstm,
    pub strategy: Strategy,
}

impl ObservationPredictor for LstmPredictor {
    fn predict_blocks(
        &self,
        history: &[ObservationBlock],
        horizon: usize,
        q: &ReferenceMatrix,
    ) -> Result<Vec<ObservationBlock>> {
        self.model.rollout(history, self.strategy, horizon, q)
    }
}

/// Test oracle: replays a pre-computed list of observation blocks.
pub struct OraclePredictor {
    pub blocks: Vec<ObservationBlock>,
}

impl ObservationPredictor for OraclePredictor {
    fn predict_blocks(
        &self,
        _history: &[ObservationBlock],
        horizon: usize,
        _q: &ReferenceMatrix,
    ) -> Result<Vec<ObservationBlock>> {
        if self.blocks.len() != horizon {
            return Err(CtpError::InvalidArgument(format!(
                "oracle holds {} blocks but horizon is {horizon}",
                self.blocks.len()
            )));
        }
        Ok(self.blocks.clone())
    }
}

/// Continue a first-stage run for `horizon` pilot-free intervals: the
/// predictor emits the imaginary observations, the filter consumes them
/// exactly like real ones, and the hidden channel keeps evolving for
/// scoring only.
pub fn run_second_stage(
    setup: &StageSetup,
    first: &FirstStage,
    predictor: &dyn ObservationPredictor,
    horizon: usize,
    channel_rng: &mut SimRng,
) -> Result<Vec<IntervalRecord>> {
    let history: Vec<ObservationBlock> =
        first.records.iter().map(|r| r.block.clone()).collect();
    let blocks = predictor.predict_blocks(&history, horizon, &setup.qref)?;
    if blocks.len() != horizon {
        return Err(CtpError::InvalidArgument(format!(
            "predictor returned {} blocks for horizon {horizon}",
            blocks.len()
        )));
    }
    let mut channel = first.channel.clone();
    let mut filter = first.filter.clone();
    let mut records = Vec::with_capacity(horizon);
    for (k, block) in blocks.into_iter().enumerate() {
        let t = first.channel.t + 1 + k;
        if block.t != t {
            return Err(CtpError::InvalidArgument(format!(
                "predicted block carries interval {}, expected {t}",
                block.t
            )));
        }
        channel = evolve(&channel, &setup.stats, &setup.cfg, channel_rng)?;
        let truth = equivalent_channel(&channel);
        filter = setup.filter_step(&first.model, &filter, &block, &channel)?;
        records.push(IntervalRecord {
            t,
            truth: truth.clone(),
            estimate: filter.h.clone(),
            nmse: nmse(&filter.h, &truth)?,
            block,
        });
    }
    Ok(records)
}

/// Outcome of one full two-stage trial.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub nmse: Vec<f64>,
    pub anmse: Vec<f64>,
    /// Observation-prediction error per stage-2 interval.
    pub ob_nmse: Vec<f64>,
    pub pilot_slots: usize,
    pub wall_clock: Duration,
}

/// Run stage 1 followed by a predicted stage 2 and score both.
pub fn run_two_stage_trial(
    setup: &StageSetup,
    predictor: &dyn ObservationPredictor,
    trial_seed: u64,
) -> Result<TrialResult> {
    let start = Instant::now();
    let base = SimRng::from_seed(trial_seed);
    let mut channel_rng = base.derive(STREAM_CHANNEL);
    let mut noise_rng = base.derive(STREAM_NOISE);
    let t1 = setup.cfg.t1;
    let t2 = setup.cfg.t2;

    let first = run_first_stage(setup, t1, &mut channel_rng, &mut noise_rng)?;

    // true (noiseless) future observations for OB-NMSE scoring only;
    // computed on a cloned channel stream so the real run is untouched
    let mut score_rng = base.derive(STREAM_CHANNEL);
    let mut score_noise = base.derive(STREAM_NOISE);
    let score_first = run_first_stage(setup, t1, &mut score_rng, &mut score_noise)?;
    let mut score_channel = score_first.channel.clone();
    let mut truth_blocks = Vec::with_capacity(t2);
    for k in 0..t2 {
        let t = t1 + 1 + k;
        score_channel = evolve(&score_channel, &setup.stats, &setup.cfg, &mut score_rng)?;
        let truth = equivalent_channel(&score_channel);
        let v = measurement_matrix(t, setup.cfg.tau1, &setup.qref)?;
        let y = observe(
            &truth,
            &v,
            setup.cfg.tx_power,
            setup.cfg.noise_var,
            &mut score_noise,
        )?;
        truth_blocks.push(ObservationBlock {
            y,
            v,
            t,
            kind: ObsKind::Real,
        });
    }

    let second = run_second_stage(setup, &first, predictor, t2, &mut channel_rng)?;
    let predicted: Vec<ObservationBlock> = second.iter().map(|r| r.block.clone()).collect();
    let ob = ob_nmse(&predicted, &truth_blocks)?;

    let nmse_series: Vec<f64> = first
        .records
        .iter()
        .chain(second.iter())
        .map(|r| r.nmse)
        .collect();
    let schedule = ProtocolSchedule {
        total: t1 + t2,
        t1,
        t2,
        tau: setup.cfg.tau,
        tau1: setup.cfg.tau1,
        cycling: false,
    };
    Ok(TrialResult {
        anmse: anmse_series(&nmse_series),
        nmse: nmse_series,
        ob_nmse: ob,
        pilot_slots: training_overhead(&schedule),
        wall_clock: start.elapsed(),
    })
}

/// Mean/std summary of one metric at one interval across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveStat {
    pub interval: usize,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// Aggregate per-trial series (all the same length) into per-interval
/// statistics, merged deterministically by trial index.
pub fn aggregate(curves: &[Vec<f64>]) -> Vec<CurveStat> {
    if curves.is_empty() {
        return Vec::new();
    }
    let len = curves[0].len();
    assert!(
        curves.iter().all(|c| c.len() == len),
        "trial series lengths differ"
    );
    let trials = curves.len();
    (0..len)
        .map(|t| {
            let mean = curves.iter().map(|c| c[t]).sum::<f64>() / trials as f64;
            let var = if trials > 1 {
                curves.iter().map(|c| (c[t] - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
            } else {
                0.0
            };
            CurveStat {
                interval: t + 1,
                mean,
                std: var.sqrt(),
                trials,
            }
        })
        .collect()
}

/// Per-trial first-stage NMSE curves under a fixed master seed; trial i is
/// seeded `master ^ i`.
pub fn monte_carlo_first_stage(
    cfg: &SystemConfig,
    ref_kind: ReferenceKind,
    tracker: TrackerKind,
    intervals: usize,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut curves = Vec::with_capacity(trials);
    for i in 0..trials {
        let trial_seed = master_seed ^ i as u64;
        let base = SimRng::from_seed(trial_seed);
        let mut ref_rng = base.derive(STREAM_REFERENCE);
        let setup = StageSetup::new(cfg.clone(), ref_kind, tracker, &mut ref_rng)?;
        let mut channel_rng = base.derive(STREAM_CHANNEL);
        let mut noise_rng = base.derive(STREAM_NOISE);
        let first = run_first_stage(&setup, intervals, &mut channel_rng, &mut noise_rng)?;
        curves.push(first.records.iter().map(|r| r.nmse).collect());
    }
    Ok(curves)
}

/// Generate supervised samples by sliding a window over continued-tracking
/// trajectories: each trajectory contributes
/// `intervals - l_in - l_pred + 1` samples.
pub fn build_training_corpus(
    cfg: &SystemConfig,
    l_in: usize,
    l_pred: usize,
    trajectories: usize,
    intervals: usize,
    master_seed: u64,
) -> Result<Vec<crate::predictor::TrainingSample>> {
    if intervals < l_in + l_pred {
        return Err(CtpError::InvalidArgument(format!(
            "trajectory length {intervals} too short for l_in + l_pred = {}",
            l_in + l_pred
        )));
    }
    let stats = derive_statistics(cfg, LosModel::Ura)?;
    let mut dummy = SimRng::from_seed(0);
    let qref = reference_matrix(ReferenceKind::Dft, cfg.n, &mut dummy)?;
    let mut corpus = Vec::new();
    for traj in 0..trajectories {
        let base = SimRng::from_seed(master_seed ^ traj as u64);
        let mut channel_rng = base.derive(STREAM_CHANNEL);
        let mut noise_rng = base.derive(STREAM_NOISE);
        let mut channel = init_channels(&stats, &mut channel_rng)?;
        let mut blocks = Vec::with_capacity(intervals);
        for t in 1..=intervals {
            channel = evolve(&channel, &stats, cfg, &mut channel_rng)?;
            let truth = equivalent_channel(&channel);
            let v = measurement_matrix(t, cfg.tau1, &qref)?;
            let y = observe(&truth, &v, cfg.tx_power, cfg.noise_var, &mut noise_rng)?;
            blocks.push(ObservationBlock {
                y,
                v,
                t,
                kind: ObsKind::Real,
            });
        }
        for j in 0..=(intervals - l_in - l_pred) {
            corpus.push(crate::predictor::TrainingSample::from_blocks(
                &blocks[j..j + l_in],
                &blocks[j + l_in..j + l_in + l_pred],
            )?);
        }
    }
    Ok(corpus)
}
