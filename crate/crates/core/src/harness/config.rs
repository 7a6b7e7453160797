//! Configuration files.
//!
//! Files are TOML with keys mirroring the `SystemConfig` fields; values
//! that are powers or gains are written in dB/dBm for readability and
//! converted to linear scale at load time. Unknown keys are rejected.
//! Perturbation variances default to the per-link path losses when the
//! `var_*_db` keys are omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{CtpError, Result};

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// On-disk schema; see the module docs for units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: usize,
    pub ap_pos: [f64; 3],
    pub irs_pos: [f64; 3],
    pub user_pos: [f64; 3],
    pub d0: f64,
    pub l0_db: f64,
    pub gamma_ia: f64,
    pub gamma_ui: f64,
    pub gamma_ua: f64,
    #[serde(default)]
    pub beta_ia: f64,
    #[serde(default)]
    pub beta_ui: f64,
    #[serde(default)]
    pub beta_ua: f64,
    pub alpha_ia: f64,
    pub alpha_ui: f64,
    pub alpha_ua: f64,
    /// Perturbation variances in dB; default: per-link path loss.
    pub var_ia_db: Option<f64>,
    pub var_ui_db: Option<f64>,
    pub var_ua_db: Option<f64>,
    pub tx_power_dbm: f64,
    pub noise_var_dbm: f64,
    pub tau: usize,
    pub tau1: usize,
    pub t1: usize,
    pub t2: usize,
}

impl ConfigFile {
    pub fn into_system_config(self) -> Result<SystemConfig> {
        let mut cfg = SystemConfig {
            n: self.n,
            ap_pos: self.ap_pos,
            irs_pos: self.irs_pos,
            user_pos: self.user_pos,
            d0: self.d0,
            l0: db_to_linear(self.l0_db),
            gamma_ia: self.gamma_ia,
            gamma_ui: self.gamma_ui,
            gamma_ua: self.gamma_ua,
            beta_ia: self.beta_ia,
            beta_ui: self.beta_ui,
            beta_ua: self.beta_ua,
            alpha_ia: self.alpha_ia,
            alpha_ui: self.alpha_ui,
            alpha_ua: self.alpha_ua,
            var_ia: 0.0,
            var_ui: 0.0,
            var_ua: 0.0,
            tx_power: db_to_linear(self.tx_power_dbm),
            noise_var: db_to_linear(self.noise_var_dbm),
            tau: self.tau,
            tau1: self.tau1,
            t1: self.t1,
            t2: self.t2,
        };
        cfg.set_link_variances_to_path_loss();
        if let Some(db) = self.var_ia_db {
            cfg.var_ia = db_to_linear(db);
        }
        if let Some(db) = self.var_ui_db {
            cfg.var_ui = db_to_linear(db);
        }
        if let Some(db) = self.var_ua_db {
            cfg.var_ua = db_to_linear(db);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_system_config(cfg: &SystemConfig) -> Self {
        Self {
            n: cfg.n,
            ap_pos: cfg.ap_pos,
            irs_pos: cfg.irs_pos,
            user_pos: cfg.user_pos,
            d0: cfg.d0,
            l0_db: linear_to_db(cfg.l0),
            gamma_ia: cfg.gamma_ia,
            gamma_ui: cfg.gamma_ui,
            gamma_ua: cfg.gamma_ua,
            beta_ia: cfg.beta_ia,
            beta_ui: cfg.beta_ui,
            beta_ua: cfg.beta_ua,
            alpha_ia: cfg.alpha_ia,
            alpha_ui: cfg.alpha_ui,
            alpha_ua: cfg.alpha_ua,
            var_ia_db: Some(linear_to_db(cfg.var_ia)),
            var_ui_db: Some(linear_to_db(cfg.var_ui)),
            var_ua_db: Some(linear_to_db(cfg.var_ua)),
            tx_power_dbm: linear_to_db(cfg.tx_power),
            noise_var_dbm: linear_to_db(cfg.noise_var),
            tau: cfg.tau,
            tau1: cfg.tau1,
            t1: cfg.t1,
            t2: cfg.t2,
        }
    }
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| CtpError::Config(format!("{e}")))?;
    file.into_system_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
n = 35
ap_pos = [3.0, 0.0, 0.0]
irs_pos = [0.0, 50.0, 2.0]
user_pos = [2.0, 50.0, 0.0]
d0 = 1.0
l0_db = -30.0
gamma_ia = 2.2
gamma_ui = 2.2
gamma_ua = 3.6
alpha_ia = 0.0
alpha_ui = 0.01
alpha_ua = 0.01
tx_power_dbm = 26.0
noise_var_dbm = -80.0
tau = 40
tau1 = 6
t1 = 6
t2 = 6
"#;

    #[test]
    fn sample_matches_default_preset() {
        let cfg = parse_config(SAMPLE).unwrap();
        let preset = SystemConfig::default_special();
        assert_eq!(cfg.n, preset.n);
        assert!((cfg.l0 - preset.l0).abs() < 1e-15);
        assert!((cfg.tx_power - preset.tx_power).abs() < 1e-9);
        assert!((cfg.noise_var - preset.noise_var).abs() < 1e-20);
        assert!((cfg.var_ia - preset.var_ia).abs() < 1e-18);
        assert!((cfg.var_ua - preset.var_ua).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{SAMPLE}\nnot_a_field = 1.0\n");
        match parse_config(&bad) {
            Err(CtpError::Config(msg)) => assert!(msg.contains("not_a_field"), "{msg}"),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = SAMPLE.replace("alpha_ui = 0.01", "alpha_ui = 1.5");
        assert!(parse_config(&bad).is_err());
        let bad = SAMPLE.replace("tau1 = 6", "tau1 = 50");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn explicit_variance_override() {
        let text = format!("{SAMPLE}\nvar_ua_db = -60.0\n");
        let cfg = parse_config(&text).unwrap();
        assert!((cfg.var_ua - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn round_trip_through_file_schema() {
        let cfg = SystemConfig::default_general();
        let file = ConfigFile::from_system_config(&cfg);
        let text = toml::to_string(&file).unwrap();
        let back = parse_config(&text).unwrap();
        assert!((back.var_ia - cfg.var_ia).abs() < 1e-20);
        assert!((back.alpha_ia - cfg.alpha_ia).abs() < 1e-15);
        assert_eq!(back.tau1, cfg.tau1);
    }
}
