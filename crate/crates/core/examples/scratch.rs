use irs_ctp::channel::SystemConfig;
use irs_ctp::harness::{aggregate, monte_carlo_first_stage, TrackerKind};
use irs_ctp::measurement::ReferenceKind;

fn main() {
    let trials = 100;
    println!("=== special case (fig6 style), tau1 sweep, {trials} trials ===");
    for tau1 in [2usize, 6, 10] {
        let cfg = SystemConfig::default_special().with_pilot_slots(tau1);
        let curves = monte_carlo_first_stage(
            &cfg, ReferenceKind::Dft, TrackerKind::SpecialStatistical, 30, trials, 42,
        ).unwrap();
        let stats = aggregate(&curves);
        let means: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.mean)).collect();
        println!("tau1={tau1:2}: {}", means.join(" "));
    }
    println!("=== general case (fig11/12 style), tau1 sweep, CGA-II ===");
    for tau1 in [2usize, 4, 6, 8] {
        let cfg = SystemConfig::default_general().with_pilot_slots(tau1);
        let curves = monte_carlo_first_stage(
            &cfg, ReferenceKind::Dft, TrackerKind::GeneralCga2, 30, trials, 42,
        ).unwrap();
        let stats = aggregate(&curves);
        let means: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.mean)).collect();
        println!("tau1={tau1:2}: {}", means.join(" "));
    }
    println!("=== general case, CGA-I vs CGA-II, tau1=6 ===");
    for (kind, name) in [(TrackerKind::GeneralCga1, "CGA-I "), (TrackerKind::GeneralCga2, "CGA-II")] {
        let cfg = SystemConfig::default_general().with_pilot_slots(6);
        let curves = monte_carlo_first_stage(&cfg, ReferenceKind::Dft, kind, 30, trials, 42).unwrap();
        let stats = aggregate(&curves);
        let means: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.mean)).collect();
        println!("{name}: {}", means.join(" "));
    }
    println!("=== fig7 style: ANMSE dft vs random, tau1=6, special ===");
    for (kind, name) in [(ReferenceKind::Dft, "dft   "), (ReferenceKind::Random, "random")] {
        let cfg = SystemConfig::default_special().with_pilot_slots(6);
        let curves = monte_carlo_first_stage(&cfg, kind, TrackerKind::SpecialStatistical, 30, trials, 42).unwrap();
        let anmse: Vec<Vec<f64>> = curves.iter().map(|c| irs_ctp::harness::anmse_series(c)).collect();
        let stats = aggregate(&anmse);
        let means: Vec<String> = stats.iter().map(|s| format!("{:.4}", s.mean)).collect();
        println!("{name}: {}", means.join(" "));
    }
}
