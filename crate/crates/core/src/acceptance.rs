//! Acceptance rate α(k): the expected fraction of k drafted tokens that the
//! verifier accepts in one round.

use crate::error::{Error, Result};

/// Measured α at a set of speculative lengths.
///
/// Between measured lengths the value is interpolated linearly; outside the
/// measured range it is clamped to the nearest endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCurve {
    points: Vec<(u32, f64)>,
}

impl TabulatedCurve {
    /// Builds a curve from `(k, alpha)` pairs in any order.
    pub fn new(mut points: Vec<(u32, f64)>) -> Result<Self> {
        points.sort_by_key(|&(k, _)| k);
        if points.len() < 2 {
            return Err(Error::InvalidCurve(format!(
                "needs ≥ 2 points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidCurve("repeated k".into()));
        }
        if let Some(&(k, a)) = points.iter().find(|&&(k, a)| k == 0 || !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidCurve(format!("bad point (k={k}, alpha={a})")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn k_min(&self) -> u32 {
        self.points[0].0
    }

    pub fn k_max(&self) -> u32 {
        self.points[self.points.len() - 1].0
    }

    pub fn alpha(&self, k: u32) -> f64 {
        let pts = &self.points;
        if k <= self.k_min() {
            return pts[0].1;
        }
        if k >= self.k_max() {
            return pts[pts.len() - 1].1;
        }
        match pts.binary_search_by_key(&k, |&(k, _)| k) {
            Ok(i) => pts[i].1,
            Err(i) => {
                let (k0, a0) = pts[i - 1];
                let (k1, a1) = pts[i];
                let t = f64::from(k - k0) / f64::from(k1 - k0);
                a0 + t * (a1 - a0)
            }
        }
    }
}

/// Per-token acceptance model: every drafted token is accepted
/// independently with probability `beta` until the first rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricCurve {
    beta: f64,
}

impl GeometricCurve {
    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&beta) {
            Ok(Self { beta })
        } else {
            Err(Error::InvalidCurve(format!("beta {beta} outside [0, 1]")))
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// β(1 − β^k) / (k(1 − β)), i.e. the expected accepted prefix over k.
    pub fn alpha(&self, k: u32) -> f64 {
        let b = self.beta;
        if b >= 1.0 {
            return 1.0;
        }
        if b <= 0.0 || k == 0 {
            return 0.0;
        }
        let k = f64::from(k);
        b * (1.0 - b.powf(k)) / (k * (1.0 - b))
    }

    /// Sum of squared residuals against measured `(k, alpha)` samples.
    pub fn sse(&self, samples: &[(u32, f64)]) -> f64 {
        samples
            .iter()
            .map(|&(k, a)| {
                let r = self.alpha(k) - a;
                r * r
            })
            .sum()
    }
}

/// Either kind of α(k) source.
#[derive(Debug, Clone, PartialEq)]
pub enum AcceptanceCurve {
    Tabulated(TabulatedCurve),
    Geometric(GeometricCurve),
}

impl AcceptanceCurve {
    pub fn alpha(&self, k: u32) -> f64 {
        match self {
            AcceptanceCurve::Tabulated(c) => c.alpha(k),
            AcceptanceCurve::Geometric(c) => c.alpha(k),
        }
    }
}

impl From<TabulatedCurve> for AcceptanceCurve {
    fn from(c: TabulatedCurve) -> Self {
        AcceptanceCurve::Tabulated(c)
    }
}

impl From<GeometricCurve> for AcceptanceCurve {
    fn from(c: GeometricCurve) -> Self {
        AcceptanceCurve::Geometric(c)
    }
}

const FIT_TOL: f64 = 1e-6;

/// Least-squares fit of the per-token model to measured samples by
/// golden-section search over β ∈ [0, 1].
pub fn fit_beta(samples: &[(u32, f64)]) -> Result<GeometricCurve> {
    if samples.is_empty() {
        return Err(Error::InvalidCurve("no samples to fit".into()));
    }
    if let Some(&(k, a)) = samples
        .iter()
        .find(|&&(k, a)| k == 0 || !(0.0..=1.0).contains(&a))
    {
        return Err(Error::InvalidCurve(format!("bad sample (k={k}, alpha={a})")));
    }
    let sse = |b: f64| GeometricCurve { beta: b }.sse(samples);
    let beta = golden_section_min(sse, 0.0, 1.0, FIT_TOL);
    GeometricCurve::new(beta)
}

/// Minimum of a unimodal `f` on `[lo, hi]`, to an interval width of `tol`.
/// The endpoints are compared too, so boundary minima are found exactly.
fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (a0, b0) = (lo, hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    [a0, b0]
        .into_iter()
        .fold(mid, |best, x| if f(x) < f(best) { x } else { best })
}

/// Tokens produced per round: accepted drafts plus the bonus token.
pub fn expected_accepted(alpha: f64, k: u32) -> f64 {
    f64::from(k) * alpha + 1.0
}
