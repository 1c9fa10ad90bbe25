use kacpp::experiment::{run, ExperimentConfig, ExperimentKind, RunResult};
use kacpp::field::KacPolynomial;
use kacpp::grid::build_grid;
use kacpp::linearize::MuBuilder;
use kacpp::process::Interval;
use kacpp::roots::{build_nu, find_all_roots};
use kacpp::sampler::{CoefficientLaw, SeedSpec};
use kacpp::stats;
use kacpp::Complex64;
use proptest::prelude::*;

fn poly(law: CoefficientLaw, n: usize, seed: u64) -> KacPolynomial {
    KacPolynomial::new(law.draw_coefficients(n, SeedSpec::new(seed, 0)).unwrap()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nu_partitions_close_upper_roots(seed in any::<u64>(), n in 32usize..200) {
        let grid = build_grid(n, 2.0, 0.1, 4, Some(8 * n)).unwrap();
        let rs = find_all_roots(&poly(CoefficientLaw::Gaussian, n, seed)).unwrap();
        let (sharp, flat) = build_nu(&rs, &grid);
        let h = (n as f64).ln() / (n * n) as f64;
        let close = rs
            .roots
            .iter()
            .filter(|z| z.im >= 0.0 && (z.norm() - 1.0).abs() <= h)
            .count();
        prop_assert_eq!(sharp.total() + flat.total(), close);
    }

    #[test]
    fn nu_is_invariant_under_z_to_minus_z(seed in any::<u64>()) {
        let n = 96;
        let grid = build_grid(n, 2.0, 0.1, 4, None).unwrap();
        let f = poly(CoefficientLaw::Rademacher, n, seed);
        let (a_sharp, a_flat) = build_nu(&find_all_roots(&f).unwrap(), &grid);
        let (b_sharp, b_flat) = build_nu(&find_all_roots(&f.alternate()).unwrap(), &grid);
        prop_assert_eq!(a_sharp.total() + a_flat.total(), b_sharp.total() + b_flat.total());
        let a = sorted([a_sharp.marks(), a_flat.marks()].concat());
        let b = sorted([b_sharp.marks(), b_flat.marks()].concat());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }
}

#[test]
fn sharp_mu_predictions_sit_on_true_roots() {
    let n = 512;
    let grid = build_grid(n, 2.0, 0.1, 4, None).unwrap();
    let builder = MuBuilder::new(&grid);
    let mut dists = Vec::new();
    for seed in 0..200 {
        let f = poly(CoefficientLaw::Gaussian, n, seed);
        let rs = find_all_roots(&f).unwrap();
        for h in builder.build(&f).hits.iter().filter(|h| h.smooth) {
            let p = h.prediction;
            let z = Complex64::from_polar(1.0 + p.rho, p.tau);
            let d = rs.roots.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min);
            dists.push(d * (n * n) as f64);
        }
    }
    // n²·distance from each prediction to the nearest true root
    let d = sorted(dists);
    assert!(d.len() > 50);
    assert!(d[d.len() / 2] < 0.5, "median {}", d[d.len() / 2]);
    assert!(d[d.len() - 1] < (n as f64).ln(), "max {}", d[d.len() - 1]);
}

#[test]
fn aggregates_recompute_from_json_summaries() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::MuNuCompare);
    cfg.n = 128;
    cfg.trials = 30;
    cfg.master_seed = 77;
    cfg.intervals = vec![[-3.0, 3.0], [0.0, 2.0]];
    let result = run(&cfg).unwrap();
    let back: RunResult = serde_json::from_str(&serde_json::to_string(&result).unwrap()).unwrap();
    assert_eq!(back.config_hash, result.config_hash);
    let s = back.summaries.unwrap();

    for (j, u) in cfg.intervals.iter().enumerate() {
        let u = Interval::new(u[0], u[1]);
        let mu: Vec<u64> = s.iter().map(|t| t.mu_sharp[j]).collect();
        let nu: Vec<u64> = s.iter().map(|t| t.nu_sharp.as_ref().unwrap()[j]).collect();
        for k in 1..=4 {
            let i = k as usize - 1;
            let r = stats::empirical_factorial_moments(&mu, k, &u).unwrap();
            assert!(close(r.estimate, back.report.mu_sharp_moments[j].moments[i].estimate));
            assert!(close(r.std_error, back.report.mu_sharp_moments[j].moments[i].std_error));
            let r = stats::empirical_factorial_moments(&nu, k, &u).unwrap();
            assert!(close(r.estimate, back.report.nu_sharp_moments[j].moments[i].estimate));
        }
    }
    let d: Vec<f64> = s.iter().map(|t| t.nearest_distance.unwrap()).collect();
    assert!(close(stats::ks_exponential(&d, 1.0 / 6.0).unwrap(), back.report.nearest.unwrap().ks));
    assert_eq!(stats::agreement_rate(&s).unwrap(), back.report.agreement_rate.unwrap());
    let (mu_rate, nu_rate) = stats::flat_mass_rate(&s).unwrap();
    let fm = back.report.flat_mass.unwrap();
    assert_eq!((Some(mu_rate), nu_rate), (fm.mu_rate, fm.nu_rate));
}

#[test]
fn universality_run_compares_two_laws() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Universality);
    cfg.n = 128;
    cfg.trials = 40;
    let r = run(&cfg).unwrap();
    let u = r.report.universality.unwrap();
    assert!(u.nu_counts.is_some() && u.nearest_ks.is_some());
    assert_eq!(r.summaries.unwrap().len(), 40);
    assert_eq!(r.summaries_b.unwrap().len(), 40);
}

#[test]
fn separation_audit_runs_g_check() {
    let mut cfg = ExperimentConfig::new(ExperimentKind::SeparationAudit);
    cfg.n = 256;
    cfg.trials = 20;
    let r = run(&cfg).unwrap();
    let g = r.report.g_check.unwrap();
    assert_eq!(g.trials, 20);
    assert!(r.report.separation.is_some());
    assert!(r.summaries.unwrap().iter().all(|s| s.g_passed.is_some()));
}
