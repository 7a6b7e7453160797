use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::*;
use irs_ctp::measurement::{ReferenceKind, ObservationBlock, ObsKind, measurement_matrix, observe};
use irs_ctp::channel::{init_channels, evolve, equivalent_channel, derive_statistics, LosModel};
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{train, Hyper, Strategy};
use std::time::Instant;

fn desk_cfg() -> SystemConfig {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 4; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 6;
    cfg.set_link_variances_to_path_loss();
    cfg
}

fn main() {
    let cfg = desk_cfg();
    let t0 = Instant::now();
    let corpus_a = build_training_corpus(&cfg, 6, 6, 35, 40, 1001).unwrap();
    let corpus_b = build_training_corpus(&cfg, 6, 1, 30, 40, 1002).unwrap();

    let mut hyper_a = Hyper::defaults(cfg.tau1, cfg.n, 6, 6);
    hyper_a.epsilon = 2; hyper_a.k_layers = 2; hyper_a.epochs = 30; hyper_a.lr = 1e-3;
    let mut hyper_b = hyper_a.clone(); hyper_b.l_pred = 1; hyper_b.epsilon = 1; hyper_b.epochs = 60;

    let (model_a, _) = train(&corpus_a, &hyper_a, &mut SimRng::from_seed(7)).unwrap();
    let (model_b, _) = train(&corpus_b, &hyper_b, &mut SimRng::from_seed(7)).unwrap();
    println!("trained both in {:?}", t0.elapsed());

    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
    let mut dummy = SimRng::from_seed(0);
    let qref = irs_ctp::measurement::reference_matrix(ReferenceKind::Dft, cfg.n, &mut dummy).unwrap();
    let agg = |curves: &Vec<Vec<f64>>| aggregate(curves).iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" ");

    // OB-NMSE on held-out runs
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

    // 2SCTP vs CT with strategy B, T2=6
    let mut ref_rng = SimRng::from_seed(0);
    let setup = StageSetup::new(cfg.clone(), ReferenceKind::Dft, TrackerKind::SpecialStatistical, &mut ref_rng).unwrap();
    let pred_b = LstmPredictor { model: model_b, strategy: Strategy::B };
    let pred_a = LstmPredictor { model: model_a, strategy: Strategy::A };
    let mut nmse_2b = vec![]; let mut nmse_2a = vec![]; let mut nmse_ct = vec![];
    for i in 0..50u64 {
        let seed = 777 ^ i;
        nmse_2b.push(run_two_stage_trial(&setup, &pred_b, seed).unwrap().nmse);
        nmse_2a.push(run_two_stage_trial(&setup, &pred_a, seed).unwrap().nmse);
        let base = SimRng::from_seed(seed);
        let mut ch = base.derive(STREAM_CHANNEL);
        let mut nz = base.derive(STREAM_NOISE);
        let ct = run_first_stage(&setup, 12, &mut ch, &mut nz).unwrap();
        nmse_ct.push(ct.records.iter().map(|r| r.nmse).collect());
    }
    println!("2S-B : {}", agg(&nmse_2b));
    println!("2S-A : {}", agg(&nmse_2a));
    println!("CT   : {}", agg(&nmse_ct));
}
