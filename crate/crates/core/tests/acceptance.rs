//! Acceptance criteria 1 to 10 at their stated tolerances.
//!
//! Prints one `PASS`/`FAIL` line per criterion followed by non-gating
//! diagnostics. The process exits non-zero on a failed criterion only when
//! `KACPP_ACCEPTANCE_STRICT=1`; the default report mode lets the workspace
//! test run complete while still printing every failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use kacpp::experiment::{self, ExperimentConfig, ExperimentKind, RunResult};
use kacpp::field::{FieldSample, KacPolynomial};
use kacpp::gauss::{self, DomainSpec};
use kacpp::grid::SampleGrid;
use kacpp::linearize::{predict, LinearModel, MuBuilder};
use kacpp::process::Interval;
use kacpp::roots;
use kacpp::sampler::{CoefficientLaw, SeedSpec};
use kacpp::stats::{self, Ensemble, TrialSummary};
use kacpp::tolerances as tol;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, pass: bool, detail: String) -> Line {
    Line { id, pass, detail }
}

fn workers() -> usize {
    std::env::var("KACPP_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn config(kind: ExperimentKind, n: usize, trials: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(kind);
    c.n = n;
    c.trials = trials;
    c.master_seed = seed;
    c.intervals = vec![[-3.0, 3.0]];
    c.workers = workers();
    c
}

fn run(c: &ExperimentConfig) -> RunResult {
    let t = Instant::now();
    let r = experiment::run(c).unwrap_or_else(|e| panic!("{} failed: {e}", c.experiment));
    eprintln!("  [{} n={} M={} done in {:.1}s]", c.experiment, c.n, c.trials, t.elapsed().as_secs_f64());
    r
}

fn criterion_1() -> Line {
    let mut notes = Vec::new();
    let mut ok = true;

    let s0 = gauss::sigma0();
    let expected = [
        [0.5, 0.0, 0.0, 0.25],
        [0.0, 0.5, -0.25, 0.0],
        [0.0, -0.25, 1.0 / 6.0, 0.0],
        [0.25, 0.0, 0.0, 1.0 / 6.0],
    ];
    let sigma_err = (0..16)
        .map(|i| (s0.get(i / 4, i % 4) - expected[i / 4][i % 4]).abs())
        .fold(0.0, f64::max);
    ok &= sigma_err == 0.0;
    notes.push(format!("Σ₀ err {sigma_err:.1e}"));

    let u = Interval::new(-3.0, 3.0);
    let mut worst_rel: f64 = 0.0;
    for big_n in [100usize, 10_000, 72_147, 1_000_000] {
        let d = DomainSpec::full_arc(u, f64::INFINITY, big_n, 1024);
        let target = u.len() / (12.0 * big_n as f64);
        worst_rel = worst_rel.max((gauss::gaussian_prob_closed_form(&d) - target).abs() / target);
    }
    ok &= worst_rel <= 1e-14 && (gauss::radial_integral(f64::INFINITY) - PI / 144.0).abs() <= 1e-16;
    notes.push(format!("|U|/(12N) rel err {worst_rel:.1e}"));

    let mut rng = SeedSpec::new(1, 0).rng();
    let mut worst_f: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(16..5000usize);
        let g = |r: &mut rand_chacha::ChaCha20Rng| -> f64 { r.sample(StandardNormal) };
        let s = FieldSample {
            t: rng.random_range(0.0..PI),
            x: g(&mut rng),
            y: g(&mut rng),
            dx: n as f64 * g(&mut rng),
            dy: n as f64 * g(&mut rng),
            n,
        };
        let p = predict(&s, s.t).expect("nonzero derivative");
        let (a, b) = LinearModel::from_sample(&s).apply(p.tau - p.theta, p.rho);
        worst_f = worst_f.max(a.abs().max(b.abs()));
    }
    ok &= worst_f <= 1e-10;
    notes.push(format!("max |F_α(τ−θ, ρ)| {worst_f:.1e}"));

    let mut worst_pois: f64 = 0.0;
    for lambda in [0.1f64, 0.5, 1.0, 2.5, 5.0] {
        for k in 1..=4u32 {
            let mut pmf = (-lambda).exp();
            let mut sum = 0.0;
            for j in 0..200i64 {
                if j > 0 {
                    pmf *= lambda / j as f64;
                }
                sum += stats::falling_factorial(j, k) as f64 * pmf;
            }
            worst_pois = worst_pois.max((sum - lambda.powi(k as i32)).abs());
        }
    }
    ok &= worst_pois <= 1e-10;
    notes.push(format!("E[(Z)_k]−λ^k {worst_pois:.1e}"));

    let mut worst_vol: f64 = 0.0;
    for (r, big_n) in [(0.5, 10usize), (1.0, 40), (0.3, 4)] {
        let d = DomainSpec {
            u: Interval::new(-1.0, 2.0),
            v: Interval::new(-0.5, 1.0),
            r,
            big_n,
            n: 7,
        };
        let exact = gauss::lebesgue_measure(&d).unwrap();
        let mc = gauss::lebesgue_measure_mc(&d, 4_000_000, SeedSpec::new(2, big_n as u64)).unwrap();
        worst_vol = worst_vol.max((mc.value - exact).abs() / exact);
    }
    ok &= worst_vol <= 0.01;
    notes.push(format!("volume rel err {worst_vol:.2e}"));

    line("1 exact algebra", ok, notes.join(", "))
}

fn covariance_worst(n: usize) -> f64 {
    let mut c = config(ExperimentKind::Covariance, n, 2, 0);
    c.angle_count = 50;
    run(&c).report.covariance.unwrap().max_deviation
}

fn criterion_2() -> Line {
    let a = covariance_worst(4096);
    let b = covariance_worst(16384);
    line(
        "2 covariance convergence",
        a <= 0.05 && a / b >= 1.5,
        format!("n=4096 max dev {a:.5} (≤ 0.05), n=16384 {b:.5}, shrink ×{:.2} (≥ 1.5)", a / b),
    )
}

fn criterion_3() -> Line {
    let mut c = config(ExperimentKind::GaussOracle, 1000, 2, 3);
    c.n_override = Some(10_000);
    c.mc_samples = 10_000_000;
    let o = run(&c).report.gauss_oracle.unwrap();
    let ok = o.rows.iter().all(|r| r.z_score <= tol::MC_SIGMAS);
    let detail = o
        .rows
        .iter()
        .map(|r| {
            format!(
                "r={}: closed {:.4e} mc {:.4e} z={:.2}",
                r.r.map_or("∞".into(), |r| r.to_string()),
                r.closed_form,
                r.monte_carlo,
                r.z_score
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    line("3 gaussian oracle", ok, detail)
}

fn criteria_4_8_9(mu: &RunResult) -> [Line; 3] {
    let rep = &mu.report;
    let m = &rep.mu_sharp_moments[0].moments;
    let flat = rep.flat_mass.unwrap().mu_rate.unwrap();
    let c4 = line(
        "4 poisson intensity (mu)",
        m[0].within(tol::MOMENT_SIGMAS) && m[1].within(tol::MOMENT_SIGMAS) && flat <= tol::MU_FLAT_RATE_MAX,
        format!(
            "E[μ♯(U)] {:.4} ± {:.4} vs 0.5 (z={:.1}); E[(μ♯)_2] {:.4} ± {:.4} vs 0.25 (z={:.1}); flat rate {flat:.4} (≤ {})",
            m[0].estimate,
            m[0].std_error,
            m[0].z_score(),
            m[1].estimate,
            m[1].std_error,
            m[1].z_score(),
            tol::MU_FLAT_RATE_MAX
        ),
    );
    let sep = rep.separation.unwrap();
    let g = rep.g_check.unwrap();
    let c8 = line(
        "8 separation audit",
        sep.violations() == 0,
        format!(
            "{} adjacent smooth pairs in {} 𝒢-passing trials; clause (i) violations {}, clause (ii) {} (window nonempty: {})",
            sep.adjacent_pairs, g.passed, sep.clause_i_violations, sep.clause_ii_violations, sep.clause_ii_window_nonempty
        ),
    );
    let ext = rep.extended.as_ref().unwrap();
    let c9 = line(
        "9 extended-intensity shape",
        !ext.inconclusive && ext.radius_ks <= tol::RADIUS_KS && ext.theta_ks <= tol::THETA_KS,
        format!(
            "{} marks; radius KS {:.4} (≤ {}), θ KS {:.4} (≤ {}); x chi² p={:.3}; y∈[0,π] fraction {}",
            ext.marks,
            ext.radius_ks,
            tol::RADIUS_KS,
            ext.theta_ks,
            tol::THETA_KS,
            ext.x_p,
            ext.y_in_zero_pi.map_or("n/a".into(), |f| format!("{f:.3}"))
        ),
    );
    [c4, c8, c9]
}

fn criterion_5(nu: &RunResult) -> Line {
    let near = nu.report.nearest.unwrap();
    let gate = nu.report.root_gate.unwrap();
    let ok = near.ks <= tol::NEAREST_KS && gate.max_residual <= 1e-8 && gate.acceptance() >= tol::ROOT_ACCEPTANCE_MIN;
    line(
        "5 nearest-root exponential law",
        ok,
        format!(
            "KS {:.4} (≤ {}) over {} trials; accepted {}/{}; max residual {:.1e}",
            near.ks, tol::NEAREST_KS, near.samples, gate.accepted, gate.attempted, gate.max_residual
        ),
    )
}

fn criterion_6(nu1024: &RunResult) -> Line {
    let a1024 = nu1024.report.agreement_rate.unwrap();
    let a512 = run(&config(ExperimentKind::MuNuCompare, 512, 1000, 612)).report.agreement_rate.unwrap();
    let a2048 = run(&config(ExperimentKind::MuNuCompare, 2048, 1000, 6048)).report.agreement_rate.unwrap();
    line(
        "6 mu-nu equivalence",
        a1024 >= tol::AGREEMENT_MIN && a2048 > a512,
        format!("agreement n=1024 {a1024:.4} (≥ {}); n=512 {a512:.4} < n=2048 {a2048:.4}?", tol::AGREEMENT_MIN),
    )
}

/// Coefficients `√(k+1)·ξ_k`: not a Kac ensemble, so it must be told apart.
fn corrupted_ensemble(grid: &SampleGrid, trials: usize, seed: u64) -> Vec<TrialSummary> {
    let u = Interval::new(-3.0, 3.0);
    let builder = MuBuilder::new(grid);
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = CoefficientLaw::Gaussian
                .draw_coefficients(grid.n(), SeedSpec::new(seed, i))
                .unwrap();
            for (k, x) in c.iter_mut().enumerate() {
                *x *= ((k + 1) as f64).sqrt();
            }
            let poly = KacPolynomial::new(c).unwrap();
            let mu = builder.build(&poly);
            let rs = roots::find_all_roots(&poly).unwrap();
            let (sharp, flat) = roots::build_nu(&rs, grid);
            let mut s = TrialSummary::mu_only(
                i,
                vec![mu.sharp.count(&u) as u64],
                vec![mu.flat.count(&u) as u64],
                mu.flat.total() as u64,
            );
            s.nu_sharp = Some(vec![sharp.count(&u) as u64]);
            s.nu_flat = Some(vec![flat.count(&u) as u64]);
            s.nu_flat_total = Some(flat.total() as u64);
            s.nearest_distance = Some(roots::nearest_distance(&rs).unwrap());
            s
        })
        .collect()
}

fn criterion_7(gauss_run: &RunResult) -> Line {
    let mut c = config(ExperimentKind::MuNuCompare, 1024, 2000, experiment::derived_seed(5));
    c.law = "rademacher".into();
    let rad = run(&c);
    let grid = c.grid().unwrap();
    let ens = |s: Vec<TrialSummary>| Ensemble {
        n: grid.n(),
        k0: grid.k0(),
        big_n: grid.big_n(),
        intervals: vec![Interval::new(-3.0, 3.0)],
        summaries: s,
    };
    let a = gauss_run.summaries.clone().unwrap();
    let b = rad.summaries.unwrap();
    let m = a.len().min(b.len());
    let rep = stats::universality_compare(&ens(a[..m].to_vec()), &ens(b[..m].to_vec())).unwrap();

    let t = Instant::now();
    let bad = corrupted_ensemble(&grid, 500, 777);
    eprintln!("  [corrupted ensemble done in {:.1}s]", t.elapsed().as_secs_f64());
    let bad_rep = stats::universality_compare(&ens(a[..500].to_vec()), &ens(bad)).unwrap();
    line(
        "7 universality",
        rep.passed && !bad_rep.passed,
        format!(
            "gauss vs rademacher: μ z={:.2}, ν z={:.2}, nearest KS {:.4} (passed {}); corrupted: μ z={:.1}, nearest KS {:.3} (rejected {})",
            rep.mu_counts.z,
            rep.nu_counts.map_or(f64::NAN, |t| t.z),
            rep.nearest_ks.unwrap_or(f64::NAN),
            rep.passed,
            bad_rep.mu_counts.z,
            bad_rep.nearest_ks.unwrap_or(f64::NAN),
            !bad_rep.passed
        ),
    )
}

fn criterion_10() -> Line {
    let mut same = true;
    for (kind, n) in [(ExperimentKind::MuPoisson, 2048), (ExperimentKind::MuNuCompare, 256)] {
        let mut c = config(kind, n, 10, 10);
        c.check_g = true;
        c.extended = true;
        c.workers = 1;
        let a = run(&c);
        c.workers = 8;
        let b = run(&c);
        same &= a.summaries == b.summaries && a.canonical_json() == b.canonical_json();
    }
    line(
        "10 determinism",
        same,
        "mu-poisson n=2048 and mu-nu-compare n=256, M=10, workers 1 vs 8".into(),
    )
}

fn diagnostics(mu: &RunResult, nu: &RunResult) -> Vec<String> {
    let mut out = Vec::new();
    let m = &nu.report.nu_sharp_moments[0].moments;
    out.push(format!(
        "ν♯(U) at n=1024: E {:.4} ± {:.4} (z={:.1}), k=2 {:.4} ± {:.4} (z={:.1}); flat rate {:.4}",
        m[0].estimate,
        m[0].std_error,
        m[0].z_score(),
        m[1].estimate,
        m[1].std_error,
        m[1].z_score(),
        nu.report.flat_mass.unwrap().nu_rate.unwrap_or(f64::NAN)
    ));
    let g = mu.report.g_check.unwrap();
    out.push(format!(
        "𝒢 pass rate at n=2048: {}/{} (min {}), worst ratio {:.3}",
        g.passed, g.trials, tol::G_PASS_RATE_MIN, g.worst_ratio
    ));
    let grid = mu.grid.as_ref().unwrap();
    out.push(format!("bad-arc fraction at n=2048: {:.4}, N={}", grid.bad_arc_fraction, grid.big_n));

    let mut c = config(ExperimentKind::MuNuCompare, 1024, 500, 4242);
    let base = c.grid().unwrap().big_n();
    c.n_override = Some(4 * base);
    let fine = run(&c);
    let fm = &fine.report.mu_sharp_moments[0].moments[0];
    out.push(format!(
        "fine grid n=1024, N={}: E[μ♯(U)] {:.4} ± {:.4}, agreement {:.4}",
        4 * base,
        fm.estimate,
        fm.std_error,
        fine.report.agreement_rate.unwrap()
    ));

    let mut c = config(ExperimentKind::MuPoisson, 2048, 500, 4343);
    c.extended = true;
    let base = c.grid().unwrap().big_n();
    c.n_override = Some(4 * base);
    let fine = run(&c);
    let fm = &fine.report.mu_sharp_moments[0].moments;
    let ext = fine.report.extended.as_ref().unwrap();
    out.push(format!(
        "fine grid n=2048, N={}: E[μ♯(U)] {:.4} ± {:.4}, k=2 {:.4} ± {:.4}, radius KS {:.4}, θ KS {:.4} ({} marks)",
        4 * base,
        fm[0].estimate,
        fm[0].std_error,
        fm[1].estimate,
        fm[1].std_error,
        ext.radius_ks,
        ext.theta_ks,
        ext.marks
    ));
    out
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut lines = vec![criterion_1(), criterion_2(), criterion_3()];

    let mut c = config(ExperimentKind::MuPoisson, 2048, 2000, 4);
    c.check_g = true;
    c.extended = true;
    let mu = run(&c);
    let [c4, c8, c9] = criteria_4_8_9(&mu);

    let nu = run(&config(ExperimentKind::MuNuCompare, 1024, 2000, 5));
    lines.push(c4);
    lines.push(criterion_5(&nu));
    lines.push(criterion_6(&nu));
    lines.push(criterion_7(&nu));
    lines.push(c8);
    lines.push(c9);
    lines.push(criterion_10());
    let diag = diagnostics(&mu, &nu);

    println!();
    for l in &lines {
        println!("criterion {:<32} {}  {}", l.id, if l.pass { "PASS" } else { "FAIL" }, l.detail);
    }
    for d in &diag {
        println!("diagnostic  {d}");
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.0}s",
        lines.len() - failed,
        t0.elapsed().as_secs_f64()
    );
    let strict = std::env::var("KACPP_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
