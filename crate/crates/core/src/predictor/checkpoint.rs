//! Model checkpoints: versioned JSON holding the hyper-parameters, every
//! parameter tensor (with optimizer state) and the normalizer statistics.
//! f64 values are written in shortest round-trip form, so a save/load
//! cycle reproduces the model bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CtpError, Result};

use super::ObLstm;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    model: ObLstm,
}

pub fn save_checkpoint(path: &Path, model: &ObLstm) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string(&file)
        .map_err(|e| CtpError::Checkpoint(format!("serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ObLstm> {
    let data = fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&data)
        .map_err(|e| CtpError::Checkpoint(format!("parse failed: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CtpError::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SimRng;
    use crate::predictor::Hyper;

    #[test]
    fn round_trip_is_bit_exact() {
        let hyper = Hyper {
            tau1: 2,
            n: 2,
            epsilon: 1,
            k_layers: 2,
            l_in: 3,
            l_pred: 1,
            lr: 1e-4,
            batch: 10,
            epochs: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        };
        let mut rng = SimRng::from_seed(2718);
        let mut model = ObLstm::new(hyper, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..model.hyper.d_in()).map(|_| rng.standard_normal()).collect())
            .collect();
        model.norm_r.fit(rows.iter());
        model.norm_i.fit(rows.iter());

        let dir = std::env::temp_dir().join("irs_ctp_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        save_checkpoint(&path, &model).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(model, loaded, "checkpoint round trip must be exact");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("irs_ctp_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad_version.json");
        std::fs::write(&path, r#"{"version": 99, "model": {}}"#).unwrap();
        assert!(load_checkpoint(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
