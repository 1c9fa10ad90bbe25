//! The normalized field `X + iY = f((1+ρ)e^{it}) / √n` and its angular
//! derivatives, pointwise and on the uniform half-circle grid.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampleGrid;

/// `f(z) = Σ_{k=0}^{n} ξ_k z^k`. The degree is `coeffs.len() - 1` even when
/// the leading coefficient vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KacPolynomial {
    coeffs: Vec<f64>,
}

impl KacPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidPolynomial(format!(
                "need at least two coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolynomial("non-finite coefficient".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `f(z)` by Horner's rule.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `(f(z), f'(z))` in one Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `ξ_k ↦ (−1)^k ξ_k`, i.e. `f(−z)`.
    pub fn alternate(&self) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
                .collect(),
        }
    }
}

/// One sample of the field on the unit circle: `W(t)` before normalization of
/// the derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// `X'(t)`, derivative in `t` of the normalized field.
    pub dx: f64,
    /// `Y'(t)`.
    pub dy: f64,
    pub n: usize,
}

impl FieldSample {
    /// `(X'/n, Y'/n)`.
    pub fn normalized_derivative(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.dx / n, self.dy / n)
    }

    /// `W(t) = (X, Y, X'/n, Y'/n)`.
    pub fn w(&self) -> [f64; 4] {
        let (a, b) = self.normalized_derivative();
        [self.x, self.y, a, b]
    }

    /// `X'² + Y'²`.
    pub fn derivative_norm_sq(&self) -> f64 {
        self.dx * self.dx + self.dy * self.dy
    }
}

/// `(X(ρ,t), Y(ρ,t))`: Horner's rule at `z = (1+ρ)e^{it}`, for `|ρ| ≤ 1/2`.
pub fn eval_field(poly: &KacPolynomial, rho: f64, t: f64) -> (f64, f64) {
    let z = Complex64::from_polar(1.0 + rho, t);
    let v = poly.eval(z) / (poly.degree() as f64).sqrt();
    (v.re, v.im)
}

/// `(X, Y, X', Y')` at angle `t` on the unit circle.
///
/// `X' + iY' = i z f'(z) / √n` at `z = e^{it}`.
pub fn eval_sample(poly: &KacPolynomial, t: f64) -> FieldSample {
    let n = poly.degree();
    let z = Complex64::from_polar(1.0, t);
    let (p, dp) = poly.eval_with_derivative(z);
    let scale = 1.0 / (n as f64).sqrt();
    let d = Complex64::i() * z * dp * scale;
    FieldSample {
        t,
        x: p.re * scale,
        y: p.im * scale,
        dx: d.re,
        dy: d.im,
        n,
    }
}

/// `(∂X/∂ρ, ∂Y/∂ρ)` at `ρ = 0`. By the polar Cauchy–Riemann equations this is
/// `(Y', −X')`: both are read off the same coefficient sums `Σ kξ_k cos(kt)`
/// and `Σ kξ_k sin(kt)`.
pub fn radial_derivative(poly: &KacPolynomial, t: f64) -> (f64, f64) {
    let z = Complex64::from_polar(1.0, t);
    let (_, dp) = poly.eval_with_derivative(z);
    let v = z * dp / (poly.degree() as f64).sqrt();
    (v.re, v.im)
}

/// Evaluates the field at every angle `πα/N`, `α = 0..=N`, for polynomials of
/// one fixed degree.
///
/// `e^{iπα/N}` are the `2N`-th roots of unity, so the whole grid is one
/// inverse DFT of length `2N` of the coefficient vector (folded mod `2N` when
/// `n ≥ 2N`). The two real sequences `ξ_k` and `kξ_k/n` are packed into a
/// single complex transform and separated by conjugate symmetry. `rustfft`
/// picks a mixed-radix, Rader or Bluestein plan depending on how `2N`
/// factors.
#[derive(Clone)]
pub struct GridEvaluator {
    n: usize,
    big_n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GridEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridEvaluator")
            .field("n", &self.n)
            .field("big_n", &self.big_n)
            .finish()
    }
}

impl GridEvaluator {
    pub fn new(n: usize, big_n: usize) -> Self {
        assert!(big_n >= 1, "grid needs N ≥ 1");
        let fft = FftPlanner::new().plan_fft_inverse(2 * big_n);
        Self { n, big_n, fft }
    }

    pub fn for_grid(grid: &SampleGrid) -> Self {
        Self::new(grid.n(), grid.big_n())
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn big_n(&self) -> usize {
        self.big_n
    }

    /// All `N + 1` samples.
    pub fn eval(&self, poly: &KacPolynomial) -> Vec<FieldSample> {
        let mut out = Vec::new();
        self.eval_into(poly, &mut out);
        out
    }

    pub fn eval_into(&self, poly: &KacPolynomial, out: &mut Vec<FieldSample>) {
        assert_eq!(
            poly.degree(),
            self.n,
            "evaluator planned for degree {} got degree {}",
            self.n,
            poly.degree()
        );
        let len = 2 * self.big_n;
        let nf = self.n as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, &c) in poly.coeffs().iter().enumerate() {
            buf[k % len] += Complex64::new(c, c * (k as f64) / nf);
        }
        self.fft.process(&mut buf);

        let scale = 1.0 / nf.sqrt();
        let step = std::f64::consts::PI / self.big_n as f64;
        out.clear();
        out.reserve(self.big_n + 1);
        for m in 0..=self.big_n {
            let c = buf[m];
            let cc = buf[(len - m) % len].conj();
            let a = (c + cc) * 0.5;
            // b = (c − cc) / 2i, rescaled back by n
            let b = (c - cc) * Complex64::new(0.0, -0.5) * nf;
            out.push(FieldSample {
                t: step * m as f64,
                x: a.re * scale,
                y: a.im * scale,
                dx: -b.im * scale,
                dy: b.re * scale,
                n: self.n,
            });
        }
    }
}

/// Grid evaluation for an explicit angle list, which must be `πα/N` for
/// `α = 0..=N`.
pub fn batch_eval_angles(poly: &KacPolynomial, angles: &[f64]) -> Result<Vec<FieldSample>> {
    if angles.len() < 2 {
        return Err(Error::NonUniformGrid { index: 0 });
    }
    let big_n = angles.len() - 1;
    let step = std::f64::consts::PI / big_n as f64;
    for (i, &a) in angles.iter().enumerate() {
        if (a - step * i as f64).abs() > 1e-12 * (1.0 + a.abs()) {
            return Err(Error::NonUniformGrid { index: i });
        }
    }
    Ok(GridEvaluator::new(poly.degree(), big_n).eval(poly))
}

/// Grid evaluation on a [`SampleGrid`].
pub fn batch_eval_grid(poly: &KacPolynomial, grid: &SampleGrid) -> Vec<FieldSample> {
    GridEvaluator::for_grid(grid).eval(poly)
}

/// Outcome of the derivative-control check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GEventReport {
    pub passed: bool,
    /// Largest `2·max|value| / (n^{k+1/2} log² n)` over all checked
    /// quantities; the factor 2 bounds the gap between the sup over the
    /// circle and the max over the `8n`-point grid (Bernstein).
    pub worst_ratio: f64,
}

/// Checks the bounds `n^{k+1/2} log² n` on `f`, `f'`, `f''` and the polar
/// partials `∂_θ`, `∂_ρ`, `∂²_θ`, `∂_θ∂_ρ`, `∂²_ρ` on the circles
/// `|z| = 1 ± log n / n²` (maximum principle), each sampled at `8n` angles.
#[derive(Clone)]
pub struct GEventChecker {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl GEventChecker {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(8 * n.max(1));
        Self { n, fft }
    }

    pub fn check(&self, poly: &KacPolynomial) -> GEventReport {
        let n = self.n;
        assert_eq!(poly.degree(), n);
        let nf = n as f64;
        let log2 = crate::log_n(n).powi(2);
        let thresholds = [0.5, 1.5, 2.5].map(|e| nf.powf(e) * log2);
        let delta = crate::log_n(n) / (nf * nf);
        let len = 8 * n;

        let mut worst: f64 = 0.0;
        for r in [1.0 + delta, 1.0 - delta] {
            // f and z f' packed (z f' pre-divided by n), z² f'' alone (by n²).
            let mut ab = vec![Complex64::new(0.0, 0.0); len];
            let mut cc = vec![Complex64::new(0.0, 0.0); len];
            let mut rk = 1.0;
            for (k, &c) in poly.coeffs().iter().enumerate() {
                let kf = k as f64;
                let v = c * rk;
                ab[k % len] += Complex64::new(v, v * kf / nf);
                cc[k % len] += Complex64::new(v * kf * (kf - 1.0) / (nf * nf), 0.0);
                rk *= r;
            }
            self.fft.process(&mut ab);
            self.fft.process(&mut cc);
            let mut max = [0.0f64; 3];
            for m in 0..len {
                let c = ab[m];
                let cj = ab[(len - m) % len].conj();
                let f = (c + cj) * 0.5;
                let zf1 = (c - cj) * Complex64::new(0.0, -0.5) * nf;
                let z2f2 = cc[m] * nf * nf;
                let order0 = f.norm();
                // |f'| = |∂_ρ f| = |zf'|/r, |∂_θ f| = |zf'|
                let b = zf1.norm();
                let order1 = (b / r).max(b);
                // |f''| = |∂²_ρ f| = |z²f''|/r², |∂²_θ f| = |zf' + z²f''|,
                // |∂_θ∂_ρ f| = |zf' + z²f''|/r
                let s = (zf1 + z2f2).norm();
                let order2 = (z2f2.norm() / (r * r)).max(s).max(s / r);
                max[0] = max[0].max(order0);
                max[1] = max[1].max(order1);
                max[2] = max[2].max(order2);
            }
            for k in 0..3 {
                worst = worst.max(2.0 * max[k] / thresholds[k]);
            }
        }
        GEventReport {
            passed: worst <= 1.0,
            worst_ratio: worst,
        }
    }
}

pub fn check_event_g(poly: &KacPolynomial) -> GEventReport {
    GEventChecker::new(poly.degree()).check(poly)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force term-by-term sums with Kahan compensation.

    pub struct Kahan {
        sum: f64,
        c: f64,
    }

    impl Kahan {
        pub fn new() -> Self {
            Self { sum: 0.0, c: 0.0 }
        }
        pub fn add(&mut self, x: f64) {
            let y = x - self.c;
            let t = self.sum + y;
            self.c = (t - self.sum) - y;
            self.sum = t;
        }
        pub fn value(&self) -> f64 {
            self.sum
        }
    }

    /// `(X, Y, X', Y')` at `ρ = 0` by direct summation.
    pub fn direct_sample(coeffs: &[f64], t: f64) -> [f64; 4] {
        let n = (coeffs.len() - 1) as f64;
        let mut acc = [Kahan::new(), Kahan::new(), Kahan::new(), Kahan::new()];
        for (k, &c) in coeffs.iter().enumerate() {
            let kf = k as f64;
            let (s, co) = (kf * t).sin_cos();
            acc[0].add(c * co);
            acc[1].add(c * s);
            acc[2].add(-kf * c * s);
            acc[3].add(kf * c * co);
        }
        acc.map(|a| a.value() / n.sqrt())
    }

    /// `(X(ρ,t), Y(ρ,t))` by direct summation.
    pub fn direct_field(coeffs: &[f64], rho: f64, t: f64) -> (f64, f64) {
        let n = (coeffs.len() - 1) as f64;
        let mut re = Kahan::new();
        let mut im = Kahan::new();
        for (k, &c) in coeffs.iter().enumerate() {
            let r = (1.0 + rho).powi(k as i32);
            let (s, co) = (k as f64 * t).sin_cos();
            re.add(c * r * co);
            im.add(c * r * s);
        }
        (re.value() / n.sqrt(), im.value() / n.sqrt())
    }
}
