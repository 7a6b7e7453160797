use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::*;
use irs_ctp::measurement::{ReferenceKind, ObservationBlock, ObsKind, measurement_matrix, observe};
use irs_ctp::channel::{init_channels, evolve, equivalent_channel, derive_statistics, LosModel};
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{train, train_continue, Hyper, Strategy, ObLstm};
use std::time::Instant;

fn desk_cfg(noise_dbm: f64) -> SystemConfig {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 4; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 6;
    cfg.noise_var = 10f64.powf(noise_dbm / 10.0);
    cfg.set_link_variances_to_path_loss();
    cfg
}

fn train_two_phase(corpus: &[irs_ctp::predictor::TrainingSample], l_pred: usize, cfg: &SystemConfig, seed: u64) -> ObLstm {
    let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, l_pred);
    hyper.epsilon = 1; hyper.k_layers = 2; hyper.epochs = 50; hyper.lr = 1e-3;
    let mut rng = SimRng::from_seed(seed);
    let (mut model, rep) = train(corpus, &hyper, &mut rng).unwrap();
    let mut hyper2 = hyper.clone(); hyper2.lr = 1e-4; hyper2.epochs = 20;
    let rep2 = train_continue(&mut model, corpus, &hyper2, &mut rng).unwrap();
    println!("  phases: {:.3e} -> {:.3e} -> {:.3e}", rep.val_loss[0], rep.val_loss.last().unwrap(), rep2.val_loss.last().unwrap());
    model
}

fn main() {
    for noise_dbm in [-80.0, -75.0] {
        let cfg = desk_cfg(noise_dbm);
        println!("== noise {noise_dbm} dBm ==");
        let t0 = Instant::now();
        let corpus_a = build_training_corpus(&cfg, 6, 6, 35, 40, 1001).unwrap();
        let corpus_b = build_training_corpus(&cfg, 6, 1, 30, 40, 1002).unwrap();
        let model_a = train_two_phase(&corpus_a, 6, &cfg, 7);
        let model_b = train_two_phase(&corpus_b, 1, &cfg, 7);
        println!("trained in {:?}", t0.elapsed());

        let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
        let mut dummy = SimRng::from_seed(0);
        let qref = irs_ctp::measurement::reference_matrix(ReferenceKind::Dft, cfg.n, &mut dummy).unwrap();
        let agg = |curves: &Vec<Vec<f64>>| aggregate(curves).iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" ");

        let mut ob_a = vec![]; let mut ob_b = vec![];
        for trial in 0..50u64 {
            let base = SimRng::from_seed(5_000_000 ^ trial);
            let mut ch_rng = base.derive(STREAM_CHANNEL);
            let mut nz_rng = base.derive(STREAM_NOISE);
            let mut channel = init_channels(&stats, &mut ch_rng).unwrap();
            let mut blocks = vec![];
            for t in 1..=12 {
                channel = evolve(&channel, &stats, &cfg, &mut ch_rng).unwrap();
                let truth = equivalent_channel(&channel);
                let v = measurement_matrix(t, cfg.tau1, &qref).unwrap();
                let y = observe(&truth, &v, cfg.tx_power, cfg.noise_var, &mut nz_rng).unwrap();
                blocks.push(ObservationBlock { y, v, t, kind: ObsKind::Real });
            }
            ob_a.push(ob_nmse(&model_a.rollout(&blocks[..6], Strategy::A, 6, &qref).unwrap(), &blocks[6..]).unwrap());
            ob_b.push(ob_nmse(&model_b.rollout(&blocks[..6], Strategy::B, 6, &qref).unwrap(), &blocks[6..]).unwrap());
        }
        println!("OB-NMSE A: {}", agg(&ob_a));
        println!("OB-NMSE B: {}", agg(&ob_b));

        let mut ref_rng = SimRng::from_seed(0);
        let setup = StageSetup::new(cfg.clone(), ReferenceKind::Dft, TrackerKind::SpecialStatistical, &mut ref_rng).unwrap();
        let pred_b = LstmPredictor { model: model_b, strategy: Strategy::B };
        let mut nmse_2b = vec![]; let mut nmse_ct = vec![];
        for i in 0..50u64 {
            let seed = 777 ^ i;
            nmse_2b.push(run_two_stage_trial(&setup, &pred_b, seed).unwrap().nmse);
            let base = SimRng::from_seed(seed);
            let mut ch = base.derive(STREAM_CHANNEL);
            let mut nz = base.derive(STREAM_NOISE);
            let ct = run_first_stage(&setup, 12, &mut ch, &mut nz).unwrap();
            nmse_ct.push(ct.records.iter().map(|r| r.nmse).collect());
        }
        let sb = aggregate(&nmse_2b); let sc = aggregate(&nmse_ct);
        println!("2S-B : {}", agg(&nmse_2b));
        println!("CT   : {}", agg(&nmse_ct));
        let ratios: Vec<String> = (6..12).map(|t| format!("{:.2}", sb[t].mean / sc[t].mean)).collect();
        println!("ratio: {}", ratios.join(" "));
    }
}
