use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::*;
use irs_ctp::measurement::{ReferenceKind, ObservationBlock, ObsKind, measurement_matrix, observe};
use irs_ctp::channel::{init_channels, evolve, equivalent_channel, derive_statistics, LosModel};
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{ObLstm, train_val, Hyper, Strategy};
use std::time::Instant;

fn desk_cfg() -> SystemConfig {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 4; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 6;
    cfg.set_link_variances_to_path_loss();
    cfg
}

fn main() {
    let cfg = desk_cfg();
    for l_pred in [6usize, 1] {
        let tr = build_training_corpus(&cfg, 6, l_pred, 32, 40, 1001).unwrap();
        let va = build_training_corpus(&cfg, 6, l_pred, 4, 40, 909_000).unwrap();
        let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, l_pred);
        hyper.epsilon = 1; hyper.k_layers = 2; hyper.lr = 1e-3; hyper.epochs = 150;
        let mut rng = SimRng::from_seed(7);
        let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
        model.norm_r.fit(tr.iter().flat_map(|s| s.inputs_re.iter()));
        model.norm_i.fit(tr.iter().flat_map(|s| s.inputs_im.iter()));
        model.fit_output_scales(tr.iter().map(|s| &s.labels_re), tr.iter().map(|s| &s.labels_im));
        let t0 = Instant::now();
        let rep1 = train_val(&mut model, &tr, &va, &hyper, &mut rng).unwrap();
        let mut hyper2 = hyper.clone(); hyper2.lr = 1e-4; hyper2.epochs = 50;
        let rep2 = train_val(&mut model, &tr, &va, &hyper2, &mut rng).unwrap();
        println!("l_pred={l_pred}: val/block {:.3e} -> {:.3e} -> {:.3e} ({:?})",
            rep1.val_loss[0] / l_pred as f64,
            rep1.val_loss.last().unwrap() / l_pred as f64,
            rep2.val_loss.last().unwrap() / l_pred as f64, t0.elapsed());

        // held-out OB
        let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
        let mut dummy = SimRng::from_seed(0);
        let qref = irs_ctp::measurement::reference_matrix(ReferenceKind::Dft, cfg.n, &mut dummy).unwrap();
        let strategy = if l_pred == 1 { Strategy::B } else { Strategy::A };
        let mut ob = vec![];
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
            ob.push(ob_nmse(&model.rollout(&blocks[..6], strategy, 6, &qref).unwrap(), &blocks[6..]).unwrap());
        }
        let stats_ob = aggregate(&ob);
        println!("  OB: {}", stats_ob.iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" "));
    }
}
