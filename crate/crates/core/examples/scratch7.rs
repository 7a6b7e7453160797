use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::*;
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{ObLstm, train_val, Hyper, Strategy};
use irs_ctp::measurement::ReferenceKind;

fn desk_cfg(alpha: f64, noise_dbm: f64) -> SystemConfig {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 4; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 3;
    cfg.alpha_ui = alpha; cfg.alpha_ua = alpha;
    cfg.noise_var = 10f64.powf(noise_dbm / 10.0);
    cfg.set_link_variances_to_path_loss();
    cfg
}

fn main() {
    let variant: Vec<String> = std::env::args().collect();
    let alpha: f64 = variant.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let noise_dbm: f64 = variant.get(2).map(|s| s.parse().unwrap()).unwrap_or(-80.0);
    println!("alpha={alpha} noise={noise_dbm} dBm");
    let cfg = desk_cfg(alpha, noise_dbm);
    let tr = build_training_corpus(&cfg, 6, 1, 32, 40, 1001).unwrap();
    let va = build_training_corpus(&cfg, 6, 1, 4, 40, 909_000).unwrap();
    let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, 1);
    hyper.epsilon = 1; hyper.k_layers = 2; hyper.lr = 1e-3; hyper.epochs = 100;
    let mut rng = SimRng::from_seed(7);
    let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
    model.norm_r.fit(tr.iter().flat_map(|s| s.inputs_re.iter()));
    model.norm_i.fit(tr.iter().flat_map(|s| s.inputs_im.iter()));
    model.fit_output_scales(tr.iter().map(|s| &s.labels_re), tr.iter().map(|s| &s.labels_im));
    let rep1 = train_val(&mut model, &tr, &va, &hyper, &mut rng).unwrap();
    let mut h2 = hyper.clone(); h2.lr = 1e-4; h2.epochs = 30;
    let rep2 = train_val(&mut model, &tr, &va, &h2, &mut rng).unwrap();
    println!("val: {:.3e} -> {:.3e} -> {:.3e}", rep1.val_loss[0], rep1.val_loss.last().unwrap(), rep2.val_loss.last().unwrap());

    let mut ref_rng = SimRng::from_seed(0);
    let setup = StageSetup::new(cfg.clone(), ReferenceKind::Dft, TrackerKind::SpecialStatistical, &mut ref_rng).unwrap();
    let pred = LstmPredictor { model, strategy: Strategy::B };
    for t2 in [3usize, 6] {
        let mut setup2 = setup.clone();
        setup2.cfg.t2 = t2;
        let mut nmse_2s = vec![]; let mut nmse_ct = vec![];
        for i in 0..50u64 {
            let seed = 777 ^ i;
            nmse_2s.push(run_two_stage_trial(&setup2, &pred, seed).unwrap().nmse);
            let base = SimRng::from_seed(seed);
            let mut ch = base.derive(STREAM_CHANNEL);
            let mut nz = base.derive(STREAM_NOISE);
            let ct = run_first_stage(&setup2, 6 + t2, &mut ch, &mut nz).unwrap();
            nmse_ct.push(ct.records.iter().map(|r| r.nmse).collect());
        }
        let s2 = aggregate(&nmse_2s); let sc = aggregate(&nmse_ct);
        let ratios: Vec<String> = (6..6 + t2).map(|t| format!("{:.2}", s2[t].mean / sc[t].mean)).collect();
        println!("T2={t2}: 2S {} | CT {} | ratios {}",
            s2[6..].iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" "),
            sc[6..].iter().map(|s| format!("{:.4}", s.mean)).collect::<Vec<_>>().join(" "),
            ratios.join(" "));
    }
}
