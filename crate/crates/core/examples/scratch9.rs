use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::*;
use irs_ctp::measurement::{ReferenceKind, ObservationBlock, ObsKind, measurement_matrix, observe};
use irs_ctp::channel::{init_channels, evolve, equivalent_channel, derive_statistics, LosModel};
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{ObLstm, train_val, Hyper, Strategy};

fn desk_cfg() -> SystemConfig {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 3; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 3;
    cfg.noise_var = 10f64.powf(-77.0/10.0);
    cfg.set_link_variances_to_path_loss();
    cfg
}

fn main() {
    let cfg = desk_cfg();
    let mut models = vec![];
    for l_pred in [6usize, 1] {
        let trajectories = if l_pred == 6 { 36 } else { 31 };
        let tr = build_training_corpus(&cfg, 6, l_pred, trajectories, 40, 1001).unwrap();
        let va = build_training_corpus(&cfg, 6, l_pred, 4, 40, 909_000).unwrap();
        println!("l_pred={l_pred}: {} train samples", tr.len());
        let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, l_pred);
        hyper.epsilon = 1; hyper.k_layers = 2; hyper.lr = 1e-3; hyper.epochs = 100;
        let mut rng = SimRng::from_seed(7);
        let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
        model.norm_r.fit(tr.iter().flat_map(|s| s.inputs_re.iter()));
        model.norm_i.fit(tr.iter().flat_map(|s| s.inputs_im.iter()));
        model.fit_output_scales(tr.iter().map(|s| &s.labels_re), tr.iter().map(|s| &s.labels_im));
        let rep1 = train_val(&mut model, &tr, &va, &hyper, &mut rng).unwrap();
        let mut h2 = hyper.clone(); h2.lr = 1e-4; h2.epochs = 30;
        let rep2 = train_val(&mut model, &tr, &va, &h2, &mut rng).unwrap();
        let all: Vec<f64> = rep1.val_loss.iter().chain(rep2.val_loss.iter()).cloned().collect();
        let minv = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let min_at = all.iter().position(|&v| v == minv).unwrap();
        println!("  val/blk: start {:.3e} min {:.3e}@{} end {:.3e}",
            all[0]/l_pred as f64, minv/l_pred as f64, min_at, all.last().unwrap()/l_pred as f64);
        models.push(model);
    }
    let (model_a, model_b) = (models.remove(0), models.remove(0));

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
    println!("OB A: {}", agg(&ob_a));
    println!("OB B: {}", agg(&ob_b));

    let mut ref_rng = SimRng::from_seed(0);
    let setup = StageSetup::new(cfg.clone(), ReferenceKind::Dft, TrackerKind::SpecialStatistical, &mut ref_rng).unwrap();
    let pred = LstmPredictor { model: model_b, strategy: Strategy::B };
    let mut nmse_2s = vec![]; let mut nmse_ct = vec![];
    for i in 0..50u64 {
        let seed = 777 ^ i;
        nmse_2s.push(run_two_stage_trial(&setup, &pred, seed).unwrap().nmse);
        let base = SimRng::from_seed(seed);
        let mut ch = base.derive(STREAM_CHANNEL);
        let mut nz = base.derive(STREAM_NOISE);
        let ct = run_first_stage(&setup, 9, &mut ch, &mut nz).unwrap();
        nmse_ct.push(ct.records.iter().map(|r| r.nmse).collect());
    }
    let s2 = aggregate(&nmse_2s); let sc = aggregate(&nmse_ct);
    println!("2S: {}", agg(&nmse_2s));
    println!("CT: {}", agg(&nmse_ct));
    let ratios: Vec<String> = (6..9).map(|t| format!("{:.2}", s2[t].mean / sc[t].mean)).collect();
    println!("ratios: {}", ratios.join(" "));
}
