//! Seeded i.i.d. coefficient draws.
//!
//! Every trial owns its own ChaCha20 stream: the key is derived from the
//! master seed and the 64-bit stream id (the ChaCha nonce) is the trial
//! index. Distinct trial indices therefore address disjoint keystreams, and a
//! trial's coefficients never depend on which worker runs it or when.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MOMENT_TOL: f64 = 1e-12;

/// `(master_seed, trial_index)`: the full identity of one trial's randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        Self {
            master_seed,
            trial_index,
        }
    }

    /// ChaCha stream id addressed by this trial.
    pub fn stream_id(&self) -> u64 {
        self.trial_index
    }

    /// Fresh generator positioned at the start of this trial's stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id());
        rng
    }
}

/// A finitely supported symmetric law, validated at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::InvalidLaw(format!(
                "{} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().chain(&probs).any(|x| !x.is_finite()) {
            return Err(Error::InvalidLaw("non-finite value or probability".into()));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidLaw("negative probability".into()));
        }
        let support = values
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p > 0.0)
            .count();
        if support < 2 {
            return Err(Error::InvalidLaw(format!(
                "degenerate law: support size {support} < 2"
            )));
        }
        let total: f64 = probs.iter().sum();
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let second: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
        if (total - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}")));
        }
        if mean.abs() > MOMENT_TOL {
            return Err(Error::InvalidLaw(format!("mean {mean} is not zero")));
        }
        if (second - 1.0).abs() > MOMENT_TOL {
            return Err(Error::InvalidLaw(format!("variance {second} is not one")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            values,
            probs,
            cumulative,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        // u can exceed the last partial sum by rounding
        self.values[idx.min(self.values.len() - 1)]
    }
}

/// Law of a single coefficient `ξ_k`. Every variant has mean 0 and variance 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CoefficientLaw {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformSymmetric,
    DiscreteSymmetric(DiscreteLaw),
}

impl CoefficientLaw {
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        DiscreteLaw::new(values, probs).map(Self::DiscreteSymmetric)
    }

    /// Parses a law from its config name and optional parameter list.
    ///
    /// `discrete` takes `[v_1, .., v_m, p_1, .., p_m]`.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let law = match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Self::Gaussian,
            "rademacher" | "littlewood" => Self::Rademacher,
            "uniform" | "uniform-symmetric" => Self::UniformSymmetric,
            "discrete" | "discrete-symmetric" => {
                if params.is_empty() || !params.len().is_multiple_of(2) {
                    return Err(Error::InvalidLaw(
                        "discrete law needs an even-length list: values then probabilities"
                            .into(),
                    ));
                }
                let (v, p) = params.split_at(params.len() / 2);
                return Self::discrete(v.to_vec(), p.to_vec());
            }
            other => return Err(Error::InvalidLaw(format!("unknown law `{other}`"))),
        };
        if !params.is_empty() {
            return Err(Error::InvalidLaw(format!("law `{name}` takes no parameters")));
        }
        Ok(law)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Rademacher => "rademacher",
            Self::UniformSymmetric => "uniform",
            Self::DiscreteSymmetric(_) => "discrete",
        }
    }

    /// Exact fourth moment `E ξ⁴`.
    pub fn fourth_moment(&self) -> f64 {
        match self {
            Self::Gaussian => 3.0,
            Self::Rademacher => 1.0,
            Self::UniformSymmetric => 9.0 / 5.0,
            Self::DiscreteSymmetric(d) => d
                .values
                .iter()
                .zip(&d.probs)
                .map(|(v, p)| v.powi(4) * p)
                .sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::UniformSymmetric => {
                let s = 3f64.sqrt();
                rng.random_range(-s..=s)
            }
            Self::DiscreteSymmetric(d) => d.sample(rng),
        }
    }

    /// Draws `(ξ_0, …, ξ_n)` from this trial's stream.
    pub fn draw_coefficients(&self, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::InvalidPolynomial(format!("degree {n} < 1")));
        }
        let mut rng = seed.rng();
        Ok((0..=n).map(|_| self.sample(&mut rng)).collect())
    }
}

/// Free-function form of [`CoefficientLaw::draw_coefficients`].
pub fn draw_coefficients(law: &CoefficientLaw, n: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    law.draw_coefficients(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_laws() -> Vec<CoefficientLaw> {
        vec![
            CoefficientLaw::Gaussian,
            CoefficientLaw::Rademacher,
            CoefficientLaw::UniformSymmetric,
            CoefficientLaw::discrete(vec![-2.0, 0.0, 2.0], vec![0.125, 0.75, 0.125]).unwrap(),
        ]
    }

    #[test]
    fn rademacher_entries_are_signs() {
        for t in 0..20 {
            let xs = CoefficientLaw::Rademacher
                .draw_coefficients(100, SeedSpec::new(3, t))
                .unwrap();
            assert_eq!(xs.len(), 101);
            assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
        }
    }

    #[test]
    fn draws_are_deterministic() {
        for law in all_laws() {
            let a = law.draw_coefficients(50, SeedSpec::new(11, 4)).unwrap();
            let b = law.draw_coefficients(50, SeedSpec::new(11, 4)).unwrap();
            assert_eq!(a, b);
            let c = law.draw_coefficients(50, SeedSpec::new(11, 5)).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn gaussian_single_draw_moments() {
        let n = 100_000;
        let xs = CoefficientLaw::Gaussian
            .draw_coefficients(n, SeedSpec::new(1, 0))
            .unwrap();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() <= 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 5.0 * (2.0 / n as f64).sqrt(), "var {var}");
    }

    #[test]
    fn pooled_moments_for_every_law() {
        // 10⁶ pooled draws; tolerance from the law's exact fourth moment.
        let m = 1_000_000usize;
        for law in all_laws() {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut drawn = 0usize;
            let mut t = 0;
            while drawn < m {
                let xs = law.draw_coefficients(9_999, SeedSpec::new(2024, t)).unwrap();
                for x in xs {
                    sum += x;
                    sum_sq += x * x;
                }
                drawn += 10_000;
                t += 1;
            }
            let mf = drawn as f64;
            let mean = sum / mf;
            let second = sum_sq / mf;
            let mu4 = law.fourth_moment();
            assert!(mean.abs() <= 5.0 / mf.sqrt(), "{}: mean {mean}", law.name());
            assert!(
                (second - 1.0).abs() <= 5.0 * (mu4 - 1.0).sqrt() / mf.sqrt() + 1e-12,
                "{}: second moment {second}",
                law.name()
            );
        }
    }

    #[test]
    fn distinct_trials_use_disjoint_streams() {
        let a = SeedSpec::new(99, 0).rng();
        let b = SeedSpec::new(99, 1).rng();
        assert_ne!(a.get_stream(), b.get_stream());
        assert_eq!(a.get_seed(), b.get_seed());
        assert_eq!(a.get_word_pos(), 0);
    }

    #[test]
    fn uniform_support() {
        let xs = CoefficientLaw::UniformSymmetric
            .draw_coefficients(10_000, SeedSpec::new(5, 5))
            .unwrap();
        let s = 3f64.sqrt();
        assert!(xs.iter().all(|x| x.abs() <= s));
    }

    #[test]
    fn degenerate_discrete_rejected() {
        assert!(CoefficientLaw::discrete(vec![1.0], vec![1.0]).is_err());
        assert!(CoefficientLaw::discrete(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        // mean not zero
        assert!(CoefficientLaw::discrete(vec![0.0, 2.0], vec![0.5, 0.5]).is_err());
        // variance not one
        assert!(CoefficientLaw::discrete(vec![-2.0, 2.0], vec![0.5, 0.5]).is_err());
        assert!(CoefficientLaw::discrete(vec![-1.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(CoefficientLaw::discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            CoefficientLaw::from_name("Gaussian", &[]).unwrap(),
            CoefficientLaw::Gaussian
        );
        assert!(CoefficientLaw::from_name("cauchy", &[]).is_err());
        assert!(CoefficientLaw::from_name("rademacher", &[1.0]).is_err());
        let d = CoefficientLaw::from_name("discrete", &[-1.0, 1.0, 0.5, 0.5]).unwrap();
        assert_eq!(d.fourth_moment(), 1.0);
        assert!(CoefficientLaw::from_name("discrete", &[-1.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn degree_zero_rejected() {
        assert!(CoefficientLaw::Gaussian
            .draw_coefficients(0, SeedSpec::new(0, 0))
            .is_err());
    }
}
