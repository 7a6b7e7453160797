//! Physical channels and their Gauss-Markov evolution.
//!
//! Three links exist: IRS-AP (`g`, length N), user-IRS (`h_r`, length N)
//! and user-AP (`h_d`, scalar). Each is Rician with per-link path loss,
//! Rician factor, temporal correlation coefficient and perturbation
//! variance. The equivalent channel stacks the direct path on top of the
//! elementwise cascaded reflected channel and is what the trackers
//! estimate.

use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};
use crate::numerics::{sample_complex_gaussian, C64, CMat, CVec, SimRng};

/// Cap applied to Rician factors so the pure-LoS limit stays finite.
pub const BETA_CAP: f64 = 1e12;

/// All physical and protocol constants, in linear units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of IRS reflecting elements.
    pub n: usize,
    /// Positions in meters.
    pub ap_pos: [f64; 3],
    pub irs_pos: [f64; 3],
    pub user_pos: [f64; 3],
    /// Reference distance (m) and path loss at the reference distance.
    pub d0: f64,
    pub l0: f64,
    /// Path-loss exponents per link.
    pub gamma_ia: f64,
    pub gamma_ui: f64,
    pub gamma_ua: f64,
    /// Rician factors per link (0 = Rayleigh).
    pub beta_ia: f64,
    pub beta_ui: f64,
    pub beta_ua: f64,
    /// Temporal correlation coefficients in [0, 1]; 0 = static, 1 = memoryless.
    pub alpha_ia: f64,
    pub alpha_ui: f64,
    pub alpha_ua: f64,
    /// Perturbation variances per link.
    pub var_ia: f64,
    pub var_ui: f64,
    pub var_ua: f64,
    /// Transmit power and noise variance.
    pub tx_power: f64,
    pub noise_var: f64,
    /// Slots per time interval and pilot slots per training interval.
    pub tau: usize,
    pub tau1: usize,
    /// Stage lengths in time intervals.
    pub t1: usize,
    pub t2: usize,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl SystemConfig {
    /// Default simulation preset: 5x7 IRS on the y-z plane, AP on the
    /// x-axis, l0 = -30 dB at d0 = 1 m, exponents (2.2, 2.2, 3.6),
    /// p = 26 dBm, noise -80 dBm, Rayleigh links, perturbation variance
    /// equal to the per-link path loss, and the IRS-AP link held static.
    pub fn default_special() -> Self {
        let mut cfg = Self {
            n: 35,
            ap_pos: [3.0, 0.0, 0.0],
            irs_pos: [0.0, 50.0, 2.0],
            user_pos: [2.0, 50.0, 0.0],
            d0: 1.0,
            l0: db_to_linear(-30.0),
            gamma_ia: 2.2,
            gamma_ui: 2.2,
            gamma_ua: 3.6,
            beta_ia: 0.0,
            beta_ui: 0.0,
            beta_ua: 0.0,
            alpha_ia: 0.0,
            alpha_ui: 0.01,
            alpha_ua: 0.01,
            var_ia: 0.0,
            var_ui: 0.0,
            var_ua: 0.0,
            tx_power: db_to_linear(26.0),
            noise_var: db_to_linear(-80.0),
            tau: 40,
            tau1: 6,
            t1: 6,
            t2: 6,
        };
        cfg.set_link_variances_to_path_loss();
        cfg
    }

    /// Same preset with all three links time-varying (alpha = 0.01 each).
    pub fn default_general() -> Self {
        let mut cfg = Self::default_special();
        cfg.alpha_ia = 0.01;
        cfg.set_link_variances_to_path_loss();
        cfg
    }

    /// Perturbation variances default to the per-link path losses, which
    /// makes the Rayleigh marginals stationary under evolution.
    pub fn set_link_variances_to_path_loss(&mut self) {
        self.var_ia = self.link_path_loss(Link::IrsAp).unwrap_or(0.0);
        self.var_ui = self.link_path_loss(Link::UserIrs).unwrap_or(0.0);
        self.var_ua = self.link_path_loss(Link::UserAp).unwrap_or(0.0);
    }

    /// Shrink the array for fast tests while keeping the physical setup.
    pub fn with_elements(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_pilot_slots(mut self, tau1: usize) -> Self {
        self.tau1 = tau1;
        self
    }

    pub fn link_distance(&self, link: Link) -> f64 {
        match link {
            Link::IrsAp => distance(self.irs_pos, self.ap_pos),
            Link::UserIrs => distance(self.user_pos, self.irs_pos),
            Link::UserAp => distance(self.user_pos, self.ap_pos),
        }
    }

    pub fn link_path_loss(&self, link: Link) -> Result<f64> {
        let (d, gamma) = match link {
            Link::IrsAp => (self.link_distance(Link::IrsAp), self.gamma_ia),
            Link::UserIrs => (self.link_distance(Link::UserIrs), self.gamma_ui),
            Link::UserAp => (self.link_distance(Link::UserAp), self.gamma_ua),
        };
        path_loss(d, gamma, self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CtpError::InvalidArgument("n must be at least 1".into()));
        }
        for (name, a) in [
            ("alpha_ia", self.alpha_ia),
            ("alpha_ui", self.alpha_ui),
            ("alpha_ua", self.alpha_ua),
        ] {
            if !(0.0..=1.0).contains(&a) {
                return Err(CtpError::InvalidArgument(format!(
                    "{name} = {a} outside [0, 1]"
                )));
            }
        }
        for (name, v) in [
            ("var_ia", self.var_ia),
            ("var_ui", self.var_ui),
            ("var_ua", self.var_ua),
            ("noise_var", self.noise_var),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(CtpError::InvalidArgument(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        // infinite Rician factors are allowed: they are capped to BETA_CAP
        // (pure-LoS limit) when statistics are derived
        for (name, b) in [
            ("beta_ia", self.beta_ia),
            ("beta_ui", self.beta_ui),
            ("beta_ua", self.beta_ua),
        ] {
            if b < 0.0 || b.is_nan() {
                return Err(CtpError::InvalidArgument(format!(
                    "{name} = {b} must be nonnegative"
                )));
            }
        }
        if self.d0 <= 0.0 || self.l0 <= 0.0 || self.tx_power <= 0.0 {
            return Err(CtpError::InvalidArgument(
                "d0, l0 and tx_power must be positive".into(),
            ));
        }
        if self.tau1 == 0 || self.tau1 > self.tau {
            return Err(CtpError::InvalidArgument(format!(
                "pilot slots tau1 = {} must satisfy 1 <= tau1 <= tau = {}",
                self.tau1, self.tau
            )));
        }
        Ok(())
    }
}

/// The three physical links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    IrsAp,
    UserIrs,
    UserAp,
}

/// Distance-dependent power gain: `l0 * (d / d0)^(-gamma)`.
pub fn path_loss(d: f64, gamma: f64, cfg: &SystemConfig) -> Result<f64> {
    if d <= 0.0 || !d.is_finite() {
        return Err(CtpError::InvalidArgument(format!(
            "distance must be positive, got {d}"
        )));
    }
    Ok(cfg.l0 * (d / cfg.d0).powf(-gamma))
}

/// The channel triple at one time interval.
#[derive(Debug, Clone)]
pub struct ChannelState {
    /// IRS-AP channel, length N.
    pub g: CVec,
    /// User-IRS channel, length N.
    pub h_r: CVec,
    /// Direct user-AP channel.
    pub h_d: C64,
    /// Time-interval index.
    pub t: usize,
}

/// First- and second-order statistics of the three links.
#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    pub mean_g: CVec,
    pub mean_hr: CVec,
    pub mean_hd: C64,
    pub l_ia: f64,
    pub l_ui: f64,
    pub l_ua: f64,
    /// Per-element NLoS variances, `l / (1 + beta)`.
    pub nlos_var_g: f64,
    pub nlos_var_hr: f64,
    pub nlos_var_hd: f64,
}

/// Source of the unit-modulus LoS steering entries.
#[derive(Debug, Clone, Copy, Default)]
pub enum LosModel {
    /// Uniform-rectangular-array response at half-wavelength spacing,
    /// pointed along the geometric link directions.
    #[default]
    Ura,
    /// All-ones steering (useful for hand-checked tests).
    Flat,
}

/// Factor n into the most square (rows, cols) grid with rows <= cols.
fn ura_dims(n: usize) -> (usize, usize) {
    let mut r = (n as f64).sqrt().floor() as usize;
    while r > 1 && n % r != 0 {
        r -= 1;
    }
    (r.max(1), n / r.max(1))
}

/// Unit-modulus URA response for an array on the y-z plane at `origin`,
/// observed from direction of `target`.
fn ura_steering(n: usize, origin: [f64; 3], target: [f64; 3]) -> CVec {
    let (_, cols) = ura_dims(n);
    let d = distance(origin, target).max(1e-12);
    let u = [
        (target[0] - origin[0]) / d,
        (target[1] - origin[1]) / d,
        (target[2] - origin[2]) / d,
    ];
    let mut v = CVec::zeros(n);
    for idx in 0..n {
        let a = (idx / cols) as f64; // z offset in half wavelengths
        let b = (idx % cols) as f64; // y offset in half wavelengths
        let phase = -std::f64::consts::PI * (b * u[1] + a * u[2]);
        v[idx] = C64::from_polar(1.0, phase);
    }
    v
}

/// Derive channel means and NLoS variances from the configuration.
///
/// Means carry `sqrt(l * beta / (1 + beta))` on unit-modulus steering
/// entries; the per-element NLoS variance is `l / (1 + beta)`.
pub fn derive_statistics(cfg: &SystemConfig, los: LosModel) -> Result<ChannelStatistics> {
    cfg.validate()?;
    let l_ia = cfg.link_path_loss(Link::IrsAp)?;
    let l_ui = cfg.link_path_loss(Link::UserIrs)?;
    let l_ua = cfg.link_path_loss(Link::UserAp)?;

    let steer = |target_from_irs: bool, toward: [f64; 3]| -> CVec {
        match los {
            LosModel::Ura => {
                debug_assert!(target_from_irs);
                ura_steering(cfg.n, cfg.irs_pos, toward)
            }
            LosModel::Flat => CVec::from_vec(vec![C64::new(1.0, 0.0); cfg.n]),
        }
    };

    let rician = |l: f64, beta: f64| -> (f64, f64) {
        let b = beta.min(BETA_CAP);
        // (LoS amplitude^2 per element, NLoS variance per element)
        (l * b / (1.0 + b), l / (1.0 + b))
    };

    let (los_pow_g, var_g) = rician(l_ia, cfg.beta_ia);
    let (los_pow_hr, var_hr) = rician(l_ui, cfg.beta_ui);
    let (los_pow_hd, var_hd) = rician(l_ua, cfg.beta_ua);

    let mean_g = steer(true, cfg.ap_pos).scale_real(los_pow_g.sqrt());
    let mean_hr = steer(true, cfg.user_pos).scale_real(los_pow_hr.sqrt());
    let mean_hd = C64::new(los_pow_hd.sqrt(), 0.0);

    Ok(ChannelStatistics {
        mean_g,
        mean_hr,
        mean_hd,
        l_ia,
        l_ui,
        l_ua,
        nlos_var_g: var_g,
        nlos_var_hr: var_hr,
        nlos_var_hd: var_hd,
    })
}

/// Draw the initial channel triple from its stationary distribution.
pub fn init_channels(stats: &ChannelStatistics, rng: &mut SimRng) -> Result<ChannelState> {
    let n = stats.mean_g.len();
    let g = sample_complex_gaussian(&stats.mean_g, &vec![stats.nlos_var_g; n], rng)?;
    let h_r = sample_complex_gaussian(&stats.mean_hr, &vec![stats.nlos_var_hr; n], rng)?;
    let h_d = sample_complex_gaussian(
        &CVec::from_vec(vec![stats.mean_hd]),
        &[stats.nlos_var_hd],
        rng,
    )?[0];
    Ok(ChannelState { g, h_r, h_d, t: 0 })
}

/// The per-link perturbation draws used in one evolution step.
#[derive(Debug, Clone)]
pub struct LinkPerturbations {
    pub u_ia: CVec,
    pub u_ui: CVec,
    pub u_ua: C64,
}

/// Advance each link one interval:
/// `x(t) = sqrt(1 - alpha) (x(t-1) - mean) + sqrt(alpha) u + mean`,
/// returning the perturbation draws alongside the new state.
pub fn evolve_detailed(
    state: &ChannelState,
    stats: &ChannelStatistics,
    cfg: &SystemConfig,
    rng: &mut SimRng,
) -> Result<(ChannelState, LinkPerturbations)> {
    let n = state.g.len();
    let zero_n = CVec::zeros(n);
    let u_ia = sample_complex_gaussian(&zero_n, &vec![cfg.var_ia; n], rng)?;
    let u_ui = sample_complex_gaussian(&zero_n, &vec![cfg.var_ui; n], rng)?;
    let u_ua = sample_complex_gaussian(&CVec::zeros(1), &[cfg.var_ua], rng)?[0];

    let step_vec = |x: &CVec, mean: &CVec, u: &CVec, alpha: f64| -> CVec {
        let keep = (1.0 - alpha).sqrt();
        let inject = alpha.sqrt();
        x.sub(mean)
            .scale_real(keep)
            .add(&u.scale_real(inject))
            .add(mean)
    };

    let g = step_vec(&state.g, &stats.mean_g, &u_ia, cfg.alpha_ia);
    let h_r = step_vec(&state.h_r, &stats.mean_hr, &u_ui, cfg.alpha_ui);
    let h_d = (state.h_d - stats.mean_hd) * (1.0 - cfg.alpha_ua).sqrt()
        + u_ua * cfg.alpha_ua.sqrt()
        + stats.mean_hd;

    Ok((
        ChannelState {
            g,
            h_r,
            h_d,
            t: state.t + 1,
        },
        LinkPerturbations { u_ia, u_ui, u_ua },
    ))
}

/// [`evolve_detailed`] without the perturbation draws.
pub fn evolve(
    state: &ChannelState,
    stats: &ChannelStatistics,
    cfg: &SystemConfig,
    rng: &mut SimRng,
) -> Result<ChannelState> {
    Ok(evolve_detailed(state, stats, cfg, rng)?.0)
}

/// The user-AP equivalent channel: `[h_d; conj(h_r,n) * g_n]`, length N+1.
pub fn equivalent_channel(state: &ChannelState) -> CVec {
    let n = state.g.len();
    assert_eq!(state.h_r.len(), n, "g and h_r dimension mismatch");
    let mut h = CVec::zeros(n + 1);
    h[0] = state.h_d;
    for i in 0..n {
        h[i + 1] = state.h_r[i].conj() * state.g[i];
    }
    h
}

/// Mean of the equivalent channel under the given statistics.
pub fn equivalent_mean(stats: &ChannelStatistics) -> CVec {
    let n = stats.mean_g.len();
    let mut h = CVec::zeros(n + 1);
    h[0] = stats.mean_hd;
    for i in 0..n {
        h[i + 1] = stats.mean_hr[i].conj() * stats.mean_g[i];
    }
    h
}

/// Covariance of the equivalent channel (diagonal; links and elements are
/// independent). Entry n uses the product-moment identity
/// `Var(conj(a) b) = (|mu_a|^2 + v_a)(|mu_b|^2 + v_b) - |mu_a mu_b|^2`.
pub fn equivalent_covariance(stats: &ChannelStatistics) -> CMat {
    let n = stats.mean_g.len();
    let mut d = vec![0.0; n + 1];
    d[0] = stats.nlos_var_hd;
    for i in 0..n {
        let pa = stats.mean_hr[i].norm_sqr();
        let pb = stats.mean_g[i].norm_sqr();
        d[i + 1] =
            (pa + stats.nlos_var_hr) * (pb + stats.nlos_var_g) - pa * pb;
    }
    CMat::from_real_diag(&d)
}

/// Second moment `E[h h^H]` of the equivalent channel; equal to the
/// covariance for Rayleigh links, `diag(l_ua, l_ia * l_ui, ...)`.
pub fn equivalent_second_moment(stats: &ChannelStatistics) -> CMat {
    let mean = equivalent_mean(stats);
    equivalent_covariance(stats).add(&mean.outer_h(&mean))
}

/// State matrices of the special case (IRS-AP link static):
/// `A = diag(sqrt(1-a_ua), sqrt(1-a_ui) I)`,
/// `B = diag(sqrt(a_ua), sqrt(a_ui) I)`,
/// `C = diag(var_ua, var_ui |g_n|^2)` evaluated at `g_assumed`.
pub fn state_matrices_special(cfg: &SystemConfig, g_assumed: &CVec) -> (CMat, CMat, CMat) {
    let n = g_assumed.len();
    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    a[0] = (1.0 - cfg.alpha_ua).sqrt();
    b[0] = cfg.alpha_ua.sqrt();
    for i in 1..=n {
        a[i] = (1.0 - cfg.alpha_ui).sqrt();
        b[i] = cfg.alpha_ui.sqrt();
    }
    let c = noise_cov_special(
        cfg,
        &g_assumed.iter().map(|g| g.norm_sqr()).collect::<Vec<_>>(),
    );
    (
        CMat::from_real_diag(&a),
        CMat::from_real_diag(&b),
        c,
    )
}

/// Special-case process-noise covariance `diag(var_ua, var_ui * gain_n)`
/// where `gain_n` is `|g_n|^2` (oracle) or `E|g_n|^2` (statistical).
pub fn noise_cov_special(cfg: &SystemConfig, gains: &[f64]) -> CMat {
    let mut d = vec![0.0; gains.len() + 1];
    d[0] = cfg.var_ua;
    for (i, &gain) in gains.iter().enumerate() {
        d[i + 1] = cfg.var_ui * gain;
    }
    CMat::from_real_diag(&d)
}

/// General-case transition matrix
/// `A_g = diag(sqrt(1-a_ua), sqrt((1-a_ia)(1-a_ui)) I)`.
pub fn state_matrices_general(cfg: &SystemConfig) -> CMat {
    let n = cfg.n;
    let mut a = vec![0.0; n + 1];
    a[0] = (1.0 - cfg.alpha_ua).sqrt();
    let refl = ((1.0 - cfg.alpha_ia) * (1.0 - cfg.alpha_ui)).sqrt();
    for entry in a.iter_mut().skip(1) {
        *entry = refl;
    }
    CMat::from_real_diag(&a)
}

/// Exact composite process noise of the general-case recursion
/// `h(t) = A_g h(t-1) + u_g(t)` for zero-mean links, given the previous
/// per-link channels and the perturbations of the step.
pub fn composite_process_noise(
    prev: &ChannelState,
    pert: &LinkPerturbations,
    cfg: &SystemConfig,
) -> CVec {
    let n = prev.g.len();
    let mut u = CVec::zeros(n + 1);
    u[0] = pert.u_ua * cfg.alpha_ua.sqrt();
    let c1 = (cfg.alpha_ia * (1.0 - cfg.alpha_ui)).sqrt();
    let c2 = (cfg.alpha_ui * (1.0 - cfg.alpha_ia)).sqrt();
    let c3 = (cfg.alpha_ia * cfg.alpha_ui).sqrt();
    for i in 0..n {
        u[i + 1] = prev.h_r[i].conj() * pert.u_ia[i] * c1
            + prev.g[i] * pert.u_ui[i].conj() * c2
            + pert.u_ia[i] * pert.u_ui[i].conj() * c3;
    }
    u
}
