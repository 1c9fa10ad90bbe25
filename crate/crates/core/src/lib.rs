//! Desk-scale laboratory for the Poisson statistics of roots of random Kac
//! polynomials near the unit circle.
//!
//! A Kac polynomial is `f(z) = Σ ξ_k z^k` with i.i.d. mean-zero, unit-variance
//! coefficients. After rescaling by `n²`, the radial offsets of its roots near
//! the unit circle form (asymptotically) a Poisson process of intensity `1/12`,
//! whatever the (sub-Gaussian) coefficient law.
//!
//! The crate builds two point processes for a single polynomial and compares
//! them statistically across many seeded trials:
//!
//! * the *linearized* process `μ_f`, obtained by sampling `f` and `f'` on a
//!   fine grid of angles, solving the local affine model for a predicted root
//!   and keeping the predictions that pass the good events (see [`linearize`]);
//! * the *true* close-root process `ν_f`, obtained from all roots of `f`
//!   (see [`roots`]).
//!
//! Gaussian-side exact computations (limiting covariance, phase-space domain
//! measures and probabilities) live in [`gauss`]; estimators and tests in
//! [`stats`]; the experiment runner behind the `kacpp` binary in
//! [`experiment`].
//!
//! ```
//! use kacpp::{sampler::{CoefficientLaw, SeedSpec}, field::KacPolynomial};
//!
//! let law = CoefficientLaw::Rademacher;
//! let coeffs = law.draw_coefficients(64, SeedSpec::new(7, 0)).unwrap();
//! let poly = KacPolynomial::new(coeffs).unwrap();
//! assert_eq!(poly.degree(), 64);
//! ```

pub mod error;
pub mod experiment;
pub mod field;
pub mod gauss;
pub mod grid;
pub mod linearize;
pub mod process;
pub mod roots;
pub mod sampler;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
pub use process::{ExtendedMark, Interval, PointProcess};
pub use rustfft::num_complex::Complex64;

/// Natural logarithm of the degree, the `log n` used in every threshold.
#[inline]
pub(crate) fn log_n(n: usize) -> f64 {
    (n as f64).ln()
}

// The guide's code listings are compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/linearization.md")]
    mod linearization {}
    #[doc = include_str!("../../../book/src/roots.md")]
    mod roots {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
