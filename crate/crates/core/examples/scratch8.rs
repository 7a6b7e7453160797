use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::build_training_corpus;
use irs_ctp::numerics::SimRng;
use irs_ctp::predictor::{train_val, Hyper, ObLstm};

fn main() {
    let mut cfg = SystemConfig::default_special().with_elements(7);
    cfg.tau1 = 4; cfg.tau = 10; cfg.t1 = 6; cfg.t2 = 3;
    cfg.noise_var = 10f64.powf(-77.0 / 10.0);
    cfg.set_link_variances_to_path_loss();
    let tr = build_training_corpus(&cfg, 6, 6, 36, 40, 1001).unwrap();
    let va = build_training_corpus(&cfg, 6, 6, 4, 40, 909_000).unwrap();
    let mut hyper = Hyper::defaults(cfg.tau1, cfg.n, 6, 6);
    hyper.epsilon = 1; hyper.k_layers = 2; hyper.lr = 1e-3; hyper.epochs = 150;
    let mut rng = SimRng::from_seed(7);
    let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
    model.norm_r.fit(tr.iter().flat_map(|s| s.inputs_re.iter()));
    model.norm_i.fit(tr.iter().flat_map(|s| s.inputs_im.iter()));
    model.fit_output_scales(tr.iter().map(|s| &s.labels_re), tr.iter().map(|s| &s.labels_im));
    let mut report = train_val(&mut model, &tr, &va, &hyper, &mut rng).unwrap();
    let mut h2 = hyper.clone(); h2.lr = 1e-4; h2.epochs = 50;
    let more = train_val(&mut model, &tr, &va, &h2, &mut rng).unwrap();
    report.val_loss.extend(more.val_loss);
    for (i, v) in report.val_loss.iter().enumerate() {
        print!("{i}:{v:.4e} ");
        if (i + 1) % 5 == 0 { println!(); }
    }
    println!();
}
