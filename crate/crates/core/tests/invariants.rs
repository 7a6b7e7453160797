//! Statistical and structural invariants that span modules.

use irs_ctp::channel::{
    derive_statistics, equivalent_channel, equivalent_second_moment, evolve, init_channels,
    ChannelState, LosModel, SystemConfig,
};
use irs_ctp::harness::{run_first_stage, StageSetup, TrackerKind, STREAM_CHANNEL, STREAM_NOISE};
use irs_ctp::measurement::{measurement_matrix, observe, reference_matrix, ObsKind, ObservationBlock, ReferenceKind};
use irs_ctp::numerics::{C64, CMat, CVec, SimRng};
use irs_ctp::predictor::{Hyper, ObLstm, Strategy, TrainingSample};
use irs_ctp::tracker::{kf_init, kf_predict, kf_update, FilterModel, NoiseProvider};

#[test]
fn gauss_markov_is_stationary_after_100_steps() {
    // Rician links with the perturbation variance matched to the marginal
    // NLoS variance: mean and variance must be preserved by evolution.
    let mut cfg = SystemConfig::default_special().with_elements(2);
    cfg.beta_ia = 1.0;
    cfg.beta_ui = 1.0;
    cfg.beta_ua = 1.0;
    cfg.alpha_ia = 0.3;
    cfg.alpha_ui = 0.5;
    cfg.alpha_ua = 0.7;
    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
    cfg.var_ia = stats.nlos_var_g;
    cfg.var_ui = stats.nlos_var_hr;
    cfg.var_ua = stats.nlos_var_hd;

    let trials = 10_000;
    let steps = 100;
    let mut rng = SimRng::from_seed(314159);
    let mut mean_g0 = C64::new(0.0, 0.0);
    let mut var_g0 = 0.0;
    let mut mean_hd = C64::new(0.0, 0.0);
    let mut var_hd = 0.0;
    for _ in 0..trials {
        let mut state = init_channels(&stats, &mut rng).unwrap();
        for _ in 0..steps {
            state = evolve(&state, &stats, &cfg, &mut rng).unwrap();
        }
        mean_g0 += state.g[0];
        var_g0 += (state.g[0] - stats.mean_g[0]).norm_sqr();
        mean_hd += state.h_d;
        var_hd += (state.h_d - stats.mean_hd).norm_sqr();
    }
    let n = trials as f64;
    let mg = mean_g0 / n;
    assert!(
        (mg - stats.mean_g[0]).norm() <= 0.05 * stats.mean_g[0].norm(),
        "g mean drifted: {mg} vs {}",
        stats.mean_g[0]
    );
    assert!(
        (var_g0 / n - stats.nlos_var_g).abs() <= 0.05 * stats.nlos_var_g,
        "g variance drifted: {} vs {}",
        var_g0 / n,
        stats.nlos_var_g
    );
    assert!((mean_hd / n - stats.mean_hd).norm() <= 0.05 * stats.mean_hd.norm());
    assert!((var_hd / n - stats.nlos_var_hd).abs() <= 0.05 * stats.nlos_var_hd);
}

#[test]
fn one_step_correlation_is_sqrt_one_minus_alpha() {
    let mut cfg = SystemConfig::default_special().with_elements(1);
    cfg.alpha_ia = 0.36; // sqrt(1 - alpha) = 0.8
    cfg.alpha_ui = 0.19; // 0.9
    cfg.alpha_ua = 0.75; // 0.5
    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
    let trials = 100_000;
    let mut rng = SimRng::from_seed(2222);
    let mut acc = [C64::new(0.0, 0.0); 3];
    let mut var = [0.0f64; 3];
    for _ in 0..trials {
        let prev = init_channels(&stats, &mut rng).unwrap();
        let next = evolve(&prev, &stats, &cfg, &mut rng).unwrap();
        // links are zero-mean Rayleigh here
        acc[0] += next.g[0] * prev.g[0].conj();
        acc[1] += next.h_r[0] * prev.h_r[0].conj();
        acc[2] += next.h_d * prev.h_d.conj();
        var[0] += prev.g[0].norm_sqr();
        var[1] += prev.h_r[0].norm_sqr();
        var[2] += prev.h_d.norm_sqr();
    }
    for (k, alpha) in [(0, cfg.alpha_ia), (1, cfg.alpha_ui), (2, cfg.alpha_ua)] {
        let rho = acc[k] / var[k];
        let expect = (1.0 - alpha).sqrt();
        assert!(
            (rho.re - expect).abs() <= 0.02 && rho.im.abs() <= 0.02,
            "link {k}: correlation {rho} vs sqrt(1-alpha) = {expect}"
        );
    }
}

#[test]
fn equivalent_channel_is_bilinear() {
    let mut rng = SimRng::from_seed(5);
    let n = 4;
    let base = ChannelState {
        g: CVec::from_vec((0..n).map(|_| rng.complex_standard()).collect()),
        h_r: CVec::from_vec((0..n).map(|_| rng.complex_standard()).collect()),
        h_d: C64::new(0.0, 0.0),
        t: 0,
    };
    let a = C64::new(1.3, -0.7);
    let h0 = equivalent_channel(&base);

    // linear in g
    let scaled_g = ChannelState {
        g: base.g.scale(a),
        ..base.clone()
    };
    let hg = equivalent_channel(&scaled_g);
    for i in 1..=n {
        assert!((hg[i] - h0[i] * a).norm() < 1e-12);
    }
    // conjugate-linear in h_r
    let scaled_hr = ChannelState {
        h_r: base.h_r.scale(a),
        ..base.clone()
    };
    let hr = equivalent_channel(&scaled_hr);
    for i in 1..=n {
        assert!((hr[i] - h0[i] * a.conj()).norm() < 1e-12);
    }
    // additive in both factors
    let shift = CVec::from_vec((0..n).map(|_| rng.complex_standard()).collect());
    let sum_g = ChannelState {
        g: base.g.add(&shift),
        ..base.clone()
    };
    let h_sum = equivalent_channel(&sum_g);
    let shifted_only = ChannelState {
        g: shift,
        ..base.clone()
    };
    let h_shift = equivalent_channel(&shifted_only);
    for i in 1..=n {
        assert!((h_sum[i] - (h0[i] + h_shift[i])).norm() < 1e-12);
    }
}

#[test]
fn prior_second_moment_matches_monte_carlo() {
    let cfg = SystemConfig::default_general().with_elements(3);
    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();
    let closed = equivalent_second_moment(&stats);
    let mut rng = SimRng::from_seed(99);
    let trials = 100_000;
    let mut acc = CMat::zeros(4, 4);
    for _ in 0..trials {
        let state = init_channels(&stats, &mut rng).unwrap();
        let h = equivalent_channel(&state);
        acc = acc.add(&h.outer_h(&h));
    }
    let emp = acc.scale_real(1.0 / trials as f64);
    for i in 0..4 {
        let want = closed.at(i, i).re;
        let got = emp.at(i, i).re;
        assert!(
            (got - want).abs() <= 0.05 * want,
            "diagonal {i}: {got} vs {want}"
        );
        for j in 0..4 {
            if i != j {
                assert!(
                    emp.at(i, j).norm() <= 0.05 * want.max(closed.at(j, j).re),
                    "off-diagonal ({i},{j}) too large: {}",
                    emp.at(i, j)
                );
            }
        }
    }
}

#[test]
fn estimation_error_is_orthogonal_to_observations() {
    // special case with the exactly correct conditional model: over many
    // trials, E[(h - h_KF) y^H] vanishes entry by entry
    let mut cfg = SystemConfig::default_special().with_elements(2);
    cfg.tau1 = 2;
    cfg.tau = 4;
    let stats = derive_statistics(&cfg, LosModel::Ura).unwrap();

    let trials = 10_000;
    let steps = 3;
    let mut rng = SimRng::from_seed(777);
    let mut qrng = SimRng::from_seed(0);
    let qref = reference_matrix(ReferenceKind::Dft, cfg.n, &mut qrng).unwrap();

    let dim = 3;
    let tau1 = 2;
    let mut sum = vec![C64::new(0.0, 0.0); dim * tau1];
    let mut sum_sq = vec![0.0f64; dim * tau1 * 2];
    for _ in 0..trials {
        let mut state = init_channels(&stats, &mut rng).unwrap();
        // conditional model given the static g of this trial
        let gains: Vec<f64> = state.g.iter().map(|g| g.norm_sqr()).collect();
        let model = FilterModel::special(&cfg, &gains);
        let prior = CMat::from_real_diag(&[
            stats.l_ua,
            stats.l_ui * gains[0],
            stats.l_ui * gains[1],
        ]);
        let mut filter = kf_init(&model, &prior).unwrap();
        let mut last_obs: Option<CVec> = None;
        for t in 1..=steps {
            state = evolve(&state, &stats, &cfg, &mut rng).unwrap();
            let h = equivalent_channel(&state);
            let v = measurement_matrix(t, tau1, &qref).unwrap();
            let y = observe(&h, &v, cfg.tx_power, cfg.noise_var, &mut rng).unwrap();
            let obs = ObservationBlock {
                y: y.clone(),
                v,
                t,
                kind: ObsKind::Real,
            };
            let (h_hat, m) = kf_predict(&filter, &model);
            filter = kf_update(&filter, &h_hat, &m, &obs, cfg.tx_power, cfg.noise_var).unwrap();
            last_obs = Some(y);
        }
        let h = equivalent_channel(&state);
        let err = h.sub(&filter.h);
        let y = last_obs.unwrap();
        for i in 0..dim {
            for j in 0..tau1 {
                let prod = err[i] * y[j].conj();
                sum[i * tau1 + j] += prod;
                sum_sq[(i * tau1 + j) * 2] += prod.re * prod.re;
                sum_sq[(i * tau1 + j) * 2 + 1] += prod.im * prod.im;
            }
        }
    }
    let n = trials as f64;
    for k in 0..dim * tau1 {
        let mean = sum[k] / n;
        let std_re = ((sum_sq[2 * k] / n - mean.re * mean.re).max(0.0) / n).sqrt();
        let std_im = ((sum_sq[2 * k + 1] / n - mean.im * mean.im).max(0.0) / n).sqrt();
        assert!(
            mean.re.abs() <= 3.0 * std_re,
            "entry {k}: Re correlation {} exceeds 3 x stderr {}",
            mean.re,
            std_re
        );
        assert!(
            mean.im.abs() <= 3.0 * std_im,
            "entry {k}: Im correlation {} exceeds 3 x stderr {}",
            mean.im,
            std_im
        );
    }
}

fn random_sample(hyper: &Hyper, rng: &mut SimRng) -> TrainingSample {
    TrainingSample {
        inputs_re: (0..hyper.l_in)
            .map(|_| (0..hyper.d_in()).map(|_| rng.standard_normal()).collect())
            .collect(),
        inputs_im: (0..hyper.l_in)
            .map(|_| (0..hyper.d_in()).map(|_| rng.standard_normal()).collect())
            .collect(),
        labels_re: (0..hyper.d_out()).map(|_| rng.standard_normal()).collect(),
        labels_im: (0..hyper.d_out()).map(|_| rng.standard_normal()).collect(),
    }
}

#[test]
fn swapping_real_and_imaginary_parts_leaves_loss_invariant() {
    let hyper = Hyper {
        tau1: 3,
        n: 2,
        epsilon: 1,
        k_layers: 2,
        l_in: 3,
        l_pred: 2,
        lr: 1e-3,
        batch: 1,
        epochs: 1,
        beta1: 0.9,
        beta2: 0.999,
        eps_adam: 1e-8,
    };
    let mut rng = SimRng::from_seed(4242);
    let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
    let fit_rows: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..hyper.d_in()).map(|_| rng.standard_normal()).collect())
        .collect();
    model.norm_r.fit(fit_rows.iter());
    let fit_rows_i: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..hyper.d_in()).map(|_| rng.standard_normal()).collect())
        .collect();
    model.norm_i.fit(fit_rows_i.iter());
    model.out_scale_r = (0..hyper.d_out()).map(|_| 0.5 + rng.uniform(0.0, 1.0)).collect();
    model.out_scale_i = (0..hyper.d_out()).map(|_| 0.5 + rng.uniform(0.0, 1.0)).collect();

    let sample = random_sample(&hyper, &mut rng);

    let mut swapped_model = model.clone();
    std::mem::swap(&mut swapped_model.params.r, &mut swapped_model.params.i);
    std::mem::swap(&mut swapped_model.norm_r, &mut swapped_model.norm_i);
    std::mem::swap(&mut swapped_model.out_scale_r, &mut swapped_model.out_scale_i);
    let swapped_sample = TrainingSample {
        inputs_re: sample.inputs_im.clone(),
        inputs_im: sample.inputs_re.clone(),
        labels_re: sample.labels_im.clone(),
        labels_im: sample.labels_re.clone(),
    };

    let a = model.sample_loss(&sample).unwrap();
    let b = swapped_model.sample_loss(&swapped_sample).unwrap();
    assert_eq!(a, b, "loss must be invariant under the R/I swap");
}

#[test]
fn shape_contract_for_forward_and_rollout() {
    for (tau1, n, eps, k, l_in, l_pred) in
        [(2usize, 2usize, 1usize, 1usize, 2usize, 1usize), (3, 4, 2, 2, 4, 3)]
    {
        let hyper = Hyper {
            tau1,
            n,
            epsilon: eps,
            k_layers: k,
            l_in,
            l_pred,
            lr: 1e-3,
            batch: 1,
            epochs: 1,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        };
        let mut rng = SimRng::from_seed(1000 + tau1 as u64);
        let mut model = ObLstm::new(hyper.clone(), &mut rng).unwrap();
        let sample = random_sample(&hyper, &mut rng);
        model.norm_r.fit(sample.inputs_re.iter());
        model.norm_i.fit(sample.inputs_im.iter());
        let out = model
            .forward_complex(&sample.inputs_re, &sample.inputs_im)
            .unwrap();
        assert_eq!(out.len(), tau1 * l_pred, "forward output length");

        // rollout block count over a synthetic block history
        let qref = reference_matrix(ReferenceKind::Dft, n, &mut rng).unwrap();
        let mut blocks = Vec::new();
        for t in 1..=l_in {
            let v = measurement_matrix(t, tau1, &qref).unwrap();
            let y = CVec::from_vec((0..tau1).map(|_| rng.complex_standard()).collect());
            blocks.push(ObservationBlock {
                y,
                v,
                t,
                kind: ObsKind::Real,
            });
        }
        let strategy = if l_pred == 1 { Strategy::B } else { Strategy::A };
        let horizon = if l_pred == 1 { 5 } else { l_pred };
        let out = model.rollout(&blocks, strategy, horizon, &qref).unwrap();
        assert_eq!(out.len(), horizon, "rollout must produce exactly the horizon");
        for (k, b) in out.iter().enumerate() {
            assert_eq!(b.t, l_in + 1 + k);
            assert_eq!(b.y.len(), tau1);
            assert_eq!(b.kind, ObsKind::Imaginary);
        }
    }
}

#[test]
fn tracking_improves_on_static_channels_without_noise() {
    // end-to-end smoke: the full first stage on a noiseless static channel
    // drives NMSE to machine precision once all directions are seen
    let mut cfg = SystemConfig::default_special().with_elements(3);
    cfg.alpha_ui = 0.0;
    cfg.alpha_ua = 0.0;
    cfg.noise_var = 0.0;
    cfg.tau1 = 2;
    cfg.tau = 4;
    let mut rng = SimRng::from_seed(11);
    let setup = StageSetup::new(
        cfg,
        ReferenceKind::Dft,
        TrackerKind::SpecialOracleGain,
        &mut rng,
    )
    .unwrap();
    let base = SimRng::from_seed(600);
    let mut ch = base.derive(STREAM_CHANNEL);
    let mut nz = base.derive(STREAM_NOISE);
    let first = run_first_stage(&setup, 2, &mut ch, &mut nz).unwrap();
    assert!(first.records[1].nmse < 1e-18, "{}", first.records[1].nmse);
}

#[test]
fn static_noise_provider_rejected_by_gkf_path() {
    // mixing the providers is a programming error surfaced as InvalidArgument
    let cfg = SystemConfig::default_special().with_elements(2);
    let model = FilterModel::special(&cfg, &[1.0, 1.0]);
    assert!(matches!(model.noise, NoiseProvider::Static(_)));
    let prior = CMat::identity(3);
    let state = kf_init(&model, &prior).unwrap();
    let mut rng = SimRng::from_seed(1);
    let qref = reference_matrix(ReferenceKind::Dft, 2, &mut rng).unwrap();
    let v = measurement_matrix(1, 2, &qref).unwrap();
    let obs = ObservationBlock {
        y: CVec::zeros(2),
        v,
        t: 1,
        kind: ObsKind::Real,
    };
    assert!(irs_ctp::tracker::gkf_step(
        &state,
        &model,
        &obs,
        irs_ctp::tracker::CgaMode::EstimateOnly
    )
    .is_err());
}
