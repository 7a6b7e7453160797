//! Kalman-filter channel tracking.
//!
//! The special case (static IRS-AP link) uses a plain linear Kalman filter
//! on the equivalent channel with a fixed process-noise covariance; Rician
//! links are handled by tracking the mean-removed channel and adding the
//! mean back. In the general case all three links vary and the composite
//! process noise contains products of Gaussians, so the filter runs on a
//! complex Gaussian approximation of that noise which is refreshed every
//! interval: CGA-I from the true per-link channels (an oracle), CGA-II
//! from the previous channel estimate only.

use crate::channel::{state_matrices_general, state_matrices_special, SystemConfig};
use crate::error::{CtpError, Result};
use crate::measurement::ObservationBlock;
use crate::numerics::{hermitian_solve, is_psd_within, C64, CMat, CVec};

/// Temporal-correlation and perturbation-variance constants shared by the
/// CGA covariance formulas.
#[derive(Debug, Clone, Copy)]
pub struct LinkParams {
    pub alpha_ia: f64,
    pub alpha_ui: f64,
    pub alpha_ua: f64,
    pub var_ia: f64,
    pub var_ui: f64,
    pub var_ua: f64,
}

impl From<&SystemConfig> for LinkParams {
    fn from(cfg: &SystemConfig) -> Self {
        Self {
            alpha_ia: cfg.alpha_ia,
            alpha_ui: cfg.alpha_ui,
            alpha_ua: cfg.alpha_ua,
            var_ia: cfg.var_ia,
            var_ui: cfg.var_ui,
            var_ua: cfg.var_ua,
        }
    }
}

/// Where the process-noise covariance comes from.
#[derive(Debug, Clone)]
pub enum NoiseProvider {
    /// Fixed covariance (special case).
    Static(CMat),
    /// Refreshed each interval via CGA-I/CGA-II (general case).
    Cga(LinkParams),
}

/// Filter-side model of the state equation and observation map.
#[derive(Debug, Clone)]
pub struct FilterModel {
    /// Diagonal state-transition matrix.
    pub a: CMat,
    /// Diagonal noise-injection matrix (identity in the general case).
    pub b: CMat,
    pub noise: NoiseProvider,
    /// Equivalent-channel mean; `Some` engages the mean-removal wrapper.
    pub mean: Option<CVec>,
    pub tx_power: f64,
    pub noise_var: f64,
}

impl FilterModel {
    /// Special-case model with the given per-element `|g_n|^2` gains in
    /// the process-noise covariance.
    pub fn special(cfg: &SystemConfig, gains: &[f64]) -> Self {
        let g_placeholder = CVec::zeros(gains.len());
        let (a, b, _) = state_matrices_special(cfg, &g_placeholder);
        let c = crate::channel::noise_cov_special(cfg, gains);
        Self {
            a,
            b,
            noise: NoiseProvider::Static(c),
            mean: None,
            tx_power: cfg.tx_power,
            noise_var: cfg.noise_var,
        }
    }

    /// General-case model: `A_g` transition, identity noise injection,
    /// CGA-refreshed covariance.
    pub fn general(cfg: &SystemConfig) -> Self {
        Self {
            a: state_matrices_general(cfg),
            b: CMat::identity(cfg.n + 1),
            noise: NoiseProvider::Cga(LinkParams::from(cfg)),
            mean: None,
            tx_power: cfg.tx_power,
            noise_var: cfg.noise_var,
        }
    }

    pub fn with_mean(mut self, mean: CVec) -> Self {
        self.mean = Some(mean);
        self
    }

    fn dim(&self) -> usize {
        self.a.rows()
    }
}

/// Filter posterior after interval `t`.
#[derive(Debug, Clone)]
pub struct KalmanState {
    /// Correction (refined state estimate).
    pub h: CVec,
    /// Estimation covariance, Hermitian PSD.
    pub m: CMat,
    /// Approximated process-noise covariance for the NEXT interval
    /// (general case only).
    pub c_gl: Option<CMat>,
    /// Index of the last processed interval (0 before any update).
    pub t: usize,
}

fn check_prior(model: &FilterModel, prior: &CMat) -> Result<()> {
    if prior.rows() != model.dim() || prior.cols() != model.dim() {
        return Err(CtpError::InvalidArgument(format!(
            "prior covariance is {}x{} but the model dimension is {}",
            prior.rows(),
            prior.cols(),
            model.dim()
        )));
    }
    if !is_psd_within(prior, 1e-9) {
        return Err(CtpError::InvalidArgument(
            "prior covariance is not Hermitian positive semidefinite".into(),
        ));
    }
    Ok(())
}

/// Initialize the special-case filter: correction at the prior mean
/// (zero for Rayleigh links), covariance at the prior.
pub fn kf_init(model: &FilterModel, prior_cov: &CMat) -> Result<KalmanState> {
    check_prior(model, prior_cov)?;
    let h = model
        .mean
        .clone()
        .unwrap_or_else(|| CVec::zeros(model.dim()));
    Ok(KalmanState {
        h,
        m: prior_cov.clone(),
        c_gl: None,
        t: 0,
    })
}

/// Initialize the general-case filter; the noise covariance starts at the
/// prior second moment and is refreshed after every update.
pub fn gkf_init(model: &FilterModel, prior: &CMat) -> Result<KalmanState> {
    let mut state = kf_init(model, prior)?;
    state.c_gl = Some(prior.clone());
    Ok(state)
}

fn process_noise_cov(state: &KalmanState, model: &FilterModel) -> CMat {
    match &model.noise {
        NoiseProvider::Static(c) => c.clone(),
        NoiseProvider::Cga(_) => state
            .c_gl
            .clone()
            .expect("CGA noise provider requires a gkf-initialized state"),
    }
}

/// Prediction step: `h_hat = A h`, `M = A M_KF A^H + B C B^H`.
pub fn kf_predict(state: &KalmanState, model: &FilterModel) -> (CVec, CMat) {
    let c = process_noise_cov(state, model);
    let h_hat = model.a.matvec(&state.h);
    let m = model
        .a
        .mul(&state.m)
        .mul(&model.a.hermitian())
        .add(&model.b.mul(&c).mul(&model.b.hermitian()));
    (h_hat, m)
}

/// Update step with effective measurement matrix `sqrt(p) V`:
/// gain `G = M V~^H (V~ M V~^H + noise_var I)^{-1}`, correction
/// `h_hat + G (y - V~ h_hat)`, covariance `M - G V~ M` re-Hermitized.
pub fn kf_update(
    state: &KalmanState,
    h_hat: &CVec,
    m_pred: &CMat,
    obs: &ObservationBlock,
    tx_power: f64,
    noise_var: f64,
) -> Result<KalmanState> {
    let dim = h_hat.len();
    if obs.v.cols() != dim || obs.y.len() != obs.v.rows() {
        return Err(CtpError::InvalidArgument(format!(
            "observation block has V {}x{} and y of length {}, expected state dimension {dim}",
            obs.v.rows(),
            obs.v.cols(),
            obs.y.len()
        )));
    }
    let v_eff = obs.v.scale_real(tx_power.sqrt());
    let tau1 = v_eff.rows();

    let mut s = v_eff.mul(m_pred).mul(&v_eff.hermitian());
    s = s.add(&CMat::identity(tau1).scale_real(noise_var)).hermitize();

    // G = M V^H S^{-1}; solve S X = V M and take G = X^H (S Hermitian, M Hermitian)
    let x = hermitian_solve(&s, &v_eff.mul(m_pred)).map_err(|e| {
        CtpError::Numerical(format!("innovation covariance not invertible: {e}"))
    })?;
    let gain = x.hermitian();

    let innovation = obs.y.sub(&v_eff.matvec(h_hat));
    let h_new = h_hat.add(&gain.matvec(&innovation));
    let m_new = m_pred.sub(&gain.mul(&v_eff).mul(m_pred)).hermitize();

    Ok(KalmanState {
        h: h_new,
        m: m_new,
        c_gl: state.c_gl.clone(),
        t: obs.t,
    })
}

/// One special-case tracking step. When the model carries a channel mean,
/// prediction and update run on the mean-removed state with the
/// observation shifted by `sqrt(p) V mean`, and the mean is added back.
pub fn kf_step(state: &KalmanState, model: &FilterModel, obs: &ObservationBlock) -> Result<KalmanState> {
    match &model.mean {
        None => {
            let (h_hat, m) = kf_predict(state, model);
            kf_update(state, &h_hat, &m, obs, model.tx_power, model.noise_var)
        }
        Some(mean) => {
            let centered = KalmanState {
                h: state.h.sub(mean),
                m: state.m.clone(),
                c_gl: state.c_gl.clone(),
                t: state.t,
            };
            let (h_hat, m) = kf_predict(&centered, model);
            let shift = obs.v.scale_real(model.tx_power.sqrt()).matvec(mean);
            let shifted = ObservationBlock {
                y: obs.y.sub(&shift),
                v: obs.v.clone(),
                t: obs.t,
                kind: obs.kind,
            };
            let mut updated = kf_update(
                &centered,
                &h_hat,
                &m,
                &shifted,
                model.tx_power,
                model.noise_var,
            )?;
            updated.h = updated.h.add(mean);
            Ok(updated)
        }
    }
}

/// Which Gaussian approximation refreshes the noise covariance.
#[derive(Debug, Clone, Copy)]
pub enum CgaMode<'a> {
    /// CGA-I: the true per-link channels of the current interval are
    /// available (oracle).
    OracleChannels { h_r: &'a CVec, g: &'a CVec },
    /// CGA-II: only the filter's own correction is used.
    EstimateOnly,
}

/// One general-case tracking step: predict with the current approximated
/// noise covariance, update, then refresh the covariance for the next
/// interval from the new correction (CGA-II) or the true channels (CGA-I).
pub fn gkf_step(
    state: &KalmanState,
    model: &FilterModel,
    obs: &ObservationBlock,
    mode: CgaMode<'_>,
) -> Result<KalmanState> {
    let params = match &model.noise {
        NoiseProvider::Cga(p) => *p,
        NoiseProvider::Static(_) => {
            return Err(CtpError::InvalidArgument(
                "gkf_step requires a CGA noise provider".into(),
            ))
        }
    };
    if state.c_gl.is_none() {
        return Err(CtpError::State(
            "general-case state missing its noise covariance; use gkf_init".into(),
        ));
    }
    let (h_hat, m) = kf_predict(state, model);
    let mut updated = kf_update(state, &h_hat, &m, obs, model.tx_power, model.noise_var)?;
    updated.c_gl = Some(match mode {
        CgaMode::OracleChannels { h_r, g } => cga1_covariance(h_r, g, &params),
        CgaMode::EstimateOnly => cga2_covariance(&updated.h, &params),
    });
    Ok(updated)
}

/// CGA-I noise covariance from the true per-link channels:
/// `diag(a_ua var_ua, sigma^2_{g,n})` with
/// `sigma^2_{g,n} = a_ia (1-a_ui) |h_r,n|^2 var_ia
///                + a_ui (1-a_ia) |g_n|^2 var_ui
///                + a_ia a_ui var_ia var_ui`.
pub fn cga1_covariance(h_r_prev: &CVec, g_prev: &CVec, p: &LinkParams) -> CMat {
    assert_eq!(h_r_prev.len(), g_prev.len(), "per-link channel length mismatch");
    let n = g_prev.len();
    let mut d = vec![0.0; n + 1];
    d[0] = p.alpha_ua * p.var_ua;
    for i in 0..n {
        d[i + 1] = p.alpha_ia * (1.0 - p.alpha_ui) * h_r_prev[i].norm_sqr() * p.var_ia
            + p.alpha_ui * (1.0 - p.alpha_ia) * g_prev[i].norm_sqr() * p.var_ui
            + p.alpha_ia * p.alpha_ui * p.var_ia * p.var_ui;
    }
    CMat::from_real_diag(&d)
}

/// CGA-II noise covariance from the previous equivalent-channel estimate:
/// reflected entry `delta_1 (|Re h_n| + |Im h_n|) + delta_2`, a lower
/// bound on the CGA-I entry for consistent channels.
pub fn cga2_covariance(h_prev: &CVec, p: &LinkParams) -> CMat {
    let n = h_prev.len() - 1;
    let delta1 = (p.alpha_ia * (1.0 - p.alpha_ia) * p.alpha_ui * (1.0 - p.alpha_ui)).sqrt()
        * (p.var_ia * p.var_ui).sqrt();
    let delta2 = p.alpha_ia * p.alpha_ui * p.var_ia * p.var_ui;
    let mut d = vec![0.0; n + 1];
    d[0] = p.alpha_ua * p.var_ua;
    for i in 1..=n {
        d[i] = delta1 * (h_prev[i].re.abs() + h_prev[i].im.abs()) + delta2;
    }
    CMat::from_real_diag(&d)
}

/// The two sides of the bound `|a|^2 + |b|^2 >= |Re(ab)| + |Im(ab)|`.
pub fn theorem1_bound(a: C64, b: C64) -> (f64, f64) {
    let lhs = a.norm_sqr() + b.norm_sqr();
    let ab = a * b;
    (lhs, ab.re.abs() + ab.im.abs())
}

/// Batch linear-MMSE estimate `C V~^H (V~ C V~^H + noise_var I)^{-1} y`
/// with `V~ = sqrt(p) V`; the single-shot estimator the Kalman filter must
/// match on its first interval, and the per-interval estimator of the
/// full-pilot channel-estimation benchmark.
pub fn batch_mmse_estimate(
    prior: &CMat,
    v: &CMat,
    tx_power: f64,
    noise_var: f64,
    y: &CVec,
) -> Result<CVec> {
    let v_eff = v.scale_real(tx_power.sqrt());
    let s = v_eff
        .mul(prior)
        .mul(&v_eff.hermitian())
        .add(&CMat::identity(v.rows()).scale_real(noise_var))
        .hermitize();
    let x = crate::numerics::hermitian_solve_vec(&s, y)?;
    Ok(prior.mul(&v_eff.hermitian()).matvec(&x))
}
