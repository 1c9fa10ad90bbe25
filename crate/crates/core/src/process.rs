//! Finite point processes on the real line, optionally carrying extended
//! marks.

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        Self { lo, hi }
    }

    /// `[-h, h]`.
    pub fn symmetric(h: f64) -> Self {
        Self::new(-h, h)
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// The five coordinates attached to a point of the extended process: the
/// anchor angle `θ`, the radial mark `x`, the angular offset `y` and the
/// normalized derivative `(x', y')`.
///
/// For linearized points `x = n²ρ_α` and `y = N(θ_α − τ_α)`. For true roots
/// `x = n²(|z| − 1)` and there is no angular offset, so `y` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedMark {
    pub theta: f64,
    pub x: f64,
    pub y: Option<f64>,
    pub dx: f64,
    pub dy: f64,
}

impl ExtendedMark {
    /// `√(x'² + y'²)`.
    pub fn derivative_radius(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Counting measure `S ↦ #{marks ∈ S}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointProcess {
    marks: Vec<f64>,
    extended: Option<Vec<ExtendedMark>>,
}

impl PointProcess {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_extended() -> Self {
        Self {
            marks: Vec::new(),
            extended: Some(Vec::new()),
        }
    }

    pub fn from_marks(marks: Vec<f64>) -> Self {
        Self {
            marks,
            extended: None,
        }
    }

    /// Adds a point. The extended mark is kept only if this process tracks
    /// extended marks; its `x` coordinate must equal `mark`.
    pub fn push(&mut self, mark: f64, extended: Option<ExtendedMark>) {
        self.marks.push(mark);
        if let Some(ext) = self.extended.as_mut() {
            let e = extended.expect("extended process needs an extended mark");
            debug_assert_eq!(e.x, mark);
            ext.push(e);
        }
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn extended(&self) -> Option<&[ExtendedMark]> {
        self.extended.as_deref()
    }

    /// Total mass `process(ℝ)`.
    pub fn total(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// `process(S)` for a closed interval `S`.
    pub fn count(&self, s: &Interval) -> usize {
        self.marks.iter().filter(|&&x| s.contains(x)).count()
    }

    /// Same process with every mark negated (the `n²(1 − |z|)` convention).
    pub fn reflected(&self) -> Self {
        Self {
            marks: self.marks.iter().map(|x| -x).collect(),
            extended: self.extended.as_ref().map(|v| {
                v.iter()
                    .map(|e| ExtendedMark { x: -e.x, ..*e })
                    .collect()
            }),
        }
    }
}
