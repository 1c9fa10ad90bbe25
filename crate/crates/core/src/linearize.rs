//! The affine model at each grid angle, the predicted root it yields, the good
//! events, and the linearized processes `μ^♯`, `μ^♭`.
//!
//! At `θ_α` the field is approximated by
//!
//! ```text
//! F_α(δ, ρ) = (X, Y) + [[X', Y'], [Y', −X']] · (δ, ρ)
//! ```
//!
//! whose unique zero gives the predicted radial offset `ρ_α` and angle
//! `τ_α = θ_α + δ`. The prediction is kept when it lands in `C_α` (event
//! `𝒜′`) and the sample is typical (event `𝒜″`).

use serde::{Deserialize, Serialize};

use crate::field::{FieldSample, GridEvaluator, KacPolynomial};
use crate::grid::SampleGrid;
use crate::process::{ExtendedMark, PointProcess};

/// `F_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub theta: f64,
    pub x: f64,
    pub y: f64,
    pub dx: f64,
    pub dy: f64,
}

impl LinearModel {
    pub fn from_sample(sample: &FieldSample) -> Self {
        Self {
            theta: sample.t,
            x: sample.x,
            y: sample.y,
            dx: sample.dx,
            dy: sample.dy,
        }
    }

    /// `F_α(δ, ρ)`.
    pub fn apply(&self, delta: f64, rho: f64) -> (f64, f64) {
        (
            self.x + self.dx * delta + self.dy * rho,
            self.y + self.dy * delta - self.dx * rho,
        )
    }

    /// `det = −(X'² + Y'²)`.
    pub fn det(&self) -> f64 {
        -(self.dx * self.dx + self.dy * self.dy)
    }

    /// Operator norm of the inverse matrix. The matrix is `√(X'²+Y'²)` times
    /// a reflection, so this is `1/√(X'²+Y'²)`.
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.dx.hypot(self.dy)
    }

    /// Frobenius norm of the matrix, `√2·√(X'²+Y'²)`.
    pub fn matrix_norm(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.dx.hypot(self.dy)
    }
}

/// The zero `(τ − θ, ρ)` of `F_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedRoot {
    pub theta: f64,
    pub rho: f64,
    pub tau: f64,
    /// `n²ρ`.
    pub z: f64,
    /// `(X'/n, Y'/n)` at `θ`.
    pub derivative: (f64, f64),
}

impl PredictedRoot {
    /// `(θ, n²ρ, N(θ − τ), X'/n, Y'/n)`.
    pub fn extended_mark(&self, big_n: usize) -> ExtendedMark {
        ExtendedMark {
            theta: self.theta,
            x: self.z,
            y: Some(big_n as f64 * (self.theta - self.tau)),
            dx: self.derivative.0,
            dy: self.derivative.1,
        }
    }
}

/// `ρ = (X'Y − XY')/D`, `τ = θ − (XX' + YY')/D` with `D = X'² + Y'²`;
/// `None` when `D = 0`.
pub fn predict(sample: &FieldSample, theta: f64) -> Option<PredictedRoot> {
    let d = sample.derivative_norm_sq();
    if d <= 0.0 || !d.is_finite() {
        return None;
    }
    let rho = (sample.dx * sample.y - sample.x * sample.dy) / d;
    let tau = theta - (sample.x * sample.dx + sample.y * sample.dy) / d;
    let n = sample.n as f64;
    Some(PredictedRoot {
        theta,
        rho,
        tau,
        z: n * n * rho,
        derivative: sample.normalized_derivative(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventFlags {
    pub a_prime: bool,
    pub a_doubleprime: bool,
    pub a: bool,
}

/// Thresholds of `𝒜′` and `𝒜″` for one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventThresholds {
    /// `log n`, bound on `n²|ρ|`.
    pub radial: f64,
    /// `n^{−2/3}`, bound on `|X|`, `|Y|`.
    pub field: f64,
    /// `n log^{−2K₀} n`.
    pub derivative_lo: f64,
    /// `n log² n`.
    pub derivative_hi: f64,
}

impl EventThresholds {
    pub fn for_grid(grid: &SampleGrid) -> Self {
        let n = grid.n() as f64;
        let l = crate::log_n(grid.n());
        Self {
            radial: l,
            field: n.powf(-2.0 / 3.0),
            derivative_lo: n * l.powf(-2.0 * grid.k0()),
            derivative_hi: n * l * l,
        }
    }

    pub fn a_doubleprime(&self, s: &FieldSample) -> bool {
        let band = |v: f64| {
            let a = v.abs();
            self.derivative_lo <= a && a <= self.derivative_hi
        };
        s.x.abs() <= self.field && s.y.abs() <= self.field && band(s.dx) && band(s.dy)
    }
}

/// `𝒜′_α`, `𝒜″_α` and `𝒜_α`. A degenerate sample (no prediction) fails all.
pub fn evaluate_events(
    pred: Option<&PredictedRoot>,
    sample: &FieldSample,
    alpha: usize,
    grid: &SampleGrid,
) -> EventFlags {
    evaluate_with(pred, sample, alpha, grid, &EventThresholds::for_grid(grid))
}

fn evaluate_with(
    pred: Option<&PredictedRoot>,
    sample: &FieldSample,
    alpha: usize,
    grid: &SampleGrid,
    thr: &EventThresholds,
) -> EventFlags {
    let Some(p) = pred else {
        return EventFlags::default();
    };
    let a_prime = p.z.abs() <= thr.radial && grid.arc_contains(alpha, p.tau);
    let a_doubleprime = thr.a_doubleprime(sample);
    EventFlags {
        a_prime,
        a_doubleprime,
        a: a_prime && a_doubleprime,
    }
}

/// One grid index where `𝒜_α` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuHit {
    pub alpha: usize,
    pub smooth: bool,
    pub prediction: PredictedRoot,
}

/// `μ^♯`, `μ^♭` (both with extended marks) and the underlying hits in
/// increasing `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuResult {
    pub sharp: PointProcess,
    pub flat: PointProcess,
    pub hits: Vec<MuHit>,
}

/// Builds `μ` from precomputed grid samples.
pub fn mu_from_samples(samples: &[FieldSample], grid: &SampleGrid) -> MuResult {
    assert_eq!(samples.len(), grid.len(), "one sample per grid angle");
    let thr = EventThresholds::for_grid(grid);
    let mut sharp = PointProcess::with_extended();
    let mut flat = PointProcess::with_extended();
    let mut hits = Vec::new();
    for (alpha, s) in samples.iter().enumerate() {
        // cheap rejection before solving the model
        if s.x.abs() > thr.field || s.y.abs() > thr.field {
            continue;
        }
        let theta = grid.theta(alpha);
        let pred = predict(s, theta);
        if !evaluate_with(pred.as_ref(), s, alpha, grid, &thr).a {
            continue;
        }
        let p = pred.expect("event 𝒜 implies a prediction");
        let smooth = grid.is_smooth_at(alpha);
        let target = if smooth { &mut sharp } else { &mut flat };
        target.push(p.z, Some(p.extended_mark(grid.big_n())));
        hits.push(MuHit {
            alpha,
            smooth,
            prediction: p,
        });
    }
    MuResult { sharp, flat, hits }
}

/// Grid evaluation plus `μ` construction, reusing one FFT plan.
#[derive(Debug, Clone)]
pub struct MuBuilder<'g> {
    grid: &'g SampleGrid,
    evaluator: GridEvaluator,
}

impl<'g> MuBuilder<'g> {
    pub fn new(grid: &'g SampleGrid) -> Self {
        Self {
            grid,
            evaluator: GridEvaluator::for_grid(grid),
        }
    }

    pub fn grid(&self) -> &SampleGrid {
        self.grid
    }

    pub fn samples(&self, poly: &KacPolynomial) -> Vec<FieldSample> {
        self.evaluator.eval(poly)
    }

    pub fn build(&self, poly: &KacPolynomial) -> MuResult {
        mu_from_samples(&self.samples(poly), self.grid)
    }
}

/// `(μ^♯, μ^♭)` for one polynomial.
pub fn build_mu(poly: &KacPolynomial, grid: &SampleGrid) -> (PointProcess, PointProcess) {
    let r = MuBuilder::new(grid).build(poly);
    (r.sharp, r.flat)
}

/// Violations of the two separation clauses among smooth hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Adjacent smooth pairs `(α, α+1)` with both events.
    pub adjacent_pairs: usize,
    /// Adjacent pairs with `|τ_α − θ_α|` outside
    /// `[π/2N·(1 − log^{−K₀} n), π/2N]`.
    pub clause_i_violations: usize,
    /// Smooth pairs with both events and `π/N < |θ_α − θ_α′| ≤ 1/(n log^{4K₀} n)`.
    pub clause_ii_violations: usize,
    /// Whether any such window exists at this `(n, N)`.
    pub clause_ii_window_nonempty: bool,
}

impl SeparationReport {
    pub fn violations(&self) -> usize {
        self.clause_i_violations + self.clause_ii_violations
    }

    pub fn merge(&mut self, other: &Self) {
        self.adjacent_pairs += other.adjacent_pairs;
        self.clause_i_violations += other.clause_i_violations;
        self.clause_ii_violations += other.clause_ii_violations;
        self.clause_ii_window_nonempty |= other.clause_ii_window_nonempty;
    }
}

/// Audits one trial's hits (sorted by `α`).
pub fn separation_audit(hits: &[MuHit], grid: &SampleGrid) -> SeparationReport {
    let big_n = grid.big_n() as f64;
    let n = grid.n() as f64;
    let l = crate::log_n(grid.n());
    let half = std::f64::consts::PI / (2.0 * big_n);
    let lo = half * (1.0 - l.powf(-grid.k0()));
    let far = 1.0 / (n * l.powf(4.0 * grid.k0()));
    let step = std::f64::consts::PI / big_n;

    let smooth: Vec<&MuHit> = hits.iter().filter(|h| h.smooth).collect();
    let mut report = SeparationReport {
        clause_ii_window_nonempty: 2.0 * step <= far,
        ..Default::default()
    };
    for (i, a) in smooth.iter().enumerate() {
        for b in &smooth[i + 1..] {
            let gap_idx = b.alpha - a.alpha;
            if gap_idx == 1 {
                report.adjacent_pairs += 1;
                let off = (a.prediction.tau - a.prediction.theta).abs();
                if !(lo <= off && off <= half) {
                    report.clause_i_violations += 1;
                }
                continue;
            }
            let gap = (b.prediction.theta - a.prediction.theta).abs();
            if gap > far {
                break;
            }
            if gap > step {
                report.clause_ii_violations += 1;
            }
        }
    }
    report
}
