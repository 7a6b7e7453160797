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
    let corpus_b = build_training_corpus(&cfg, 6, 1, 30, 40, 1002).unwrap();

    // held-out evaluation data
    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
    let mut dummy = SimRng::from_seed(0);
    let qref = irs_ctp::measurement::reference_matrix(ReferenceKind::Dft, cfg.n, &mut dummy).unwrap();
    let mut eval_runs = vec![];
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
        eval_runs.push(blocks);
    }
    let agg = |curves: &Vec<Vec<f64>>| aggregate(curves).iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" ");

    // copy-baseline: predict y(t+1) := y(t-1) (same measurement matrix two intervals back)
    let mut ob_copy = vec![];
    for blocks in &eval_runs {
        let mut preds = vec![];
        let mut window: Vec<ObservationBlock> = blocks[..6].to_vec();
        for k in 0..6 {
            let t = 7 + k;
            let src = window[window.len() - 2].clone();
            let v = measurement_matrix(t, cfg.tau1, &qref).unwrap();
            let b = ObservationBlock { y: src.y.clone(), v, t, kind: ObsKind::Imaginary };
            window.remove(0); window.push(b.clone());
            preds.push(b);
        }
        ob_copy.push(ob_nmse(&preds, &blocks[6..]).unwrap());
    }
    println!("OB-NMSE copy-baseline: {}", agg(&ob_copy));

    for (epochs, lr, eps, k) in [(30usize, 1e-3, 2usize, 2usize), (60, 1e-3, 1, 2), (60, 1e-3, 2, 2)] {
        let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, 1);
        hyper.epsilon = eps; hyper.k_layers = k; hyper.epochs = epochs; hyper.lr = lr;
        let t0 = Instant::now();
        let (model, rep) = train(&corpus_b, &hyper, &mut SimRng::from_seed(7)).unwrap();
        let mut ob = vec![];
        for blocks in &eval_runs {
            let pred = model.rollout(&blocks[..6], Strategy::B, 6, &qref).unwrap();
            ob.push(ob_nmse(&pred, &blocks[6..]).unwrap());
        }
        println!("B eps={eps} K={k} lr={lr:.0e} epochs={epochs} ({:?}): val {:.3e} -> {:.3e} | OB {}",
            t0.elapsed(), rep.val_loss[0], rep.val_loss.last().unwrap(), agg(&ob));
    }
}
