//! Marginal medians along a context direction.
//!
//! For a density `f` and unit `u`, the ψ ratio is
//! `ψ(y) = ∫f 1{<u,x> ≤ y − ε/2} / ∫f 1{<u,x> ≥ y + ε/2}`, which is
//! nondecreasing in `y`. The ε-window median is a root of `ψ = 1`; with
//! `ε = 0` it is the ordinary median. Both are found by bisection on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::density::{DensityState, EstimatorConfig, WeightedSamples};
use crate::error::{check_dim, param_err, Result};
use crate::model::Context;

pub const DEFAULT_TOL: f64 = 0.05;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianResult {
    pub y: f64,
    pub psi_at_y: f64,
    pub iterations: usize,
    /// `|ψ(y) − 1|`; infinite if ψ is.
    pub achieved_tol: f64,
    /// Width of the last bisection bracket.
    pub bracket_width: f64,
    /// Set when ψ did not bracket 1 on `[-1, 1]` or the band was never reached.
    pub flagged: bool,
}

/// Masses of a density on either side of a threshold along a fixed direction.
pub trait LineMasses {
    /// `∫f 1{<u,x> ≤ t}`.
    fn mass_le(&self, t: f64) -> f64;
    /// `∫f 1{<u,x> ≥ t}`.
    fn mass_ge(&self, t: f64) -> f64;

    fn psi(&self, y: f64, eps: f64) -> f64 {
        let num = self.mass_le(y - eps / 2.0);
        let den = self.mass_ge(y + eps / 2.0);
        if den <= 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }
}

/// Weighted sample projections sorted along `u`, with prefix and suffix sums.
///
/// Weights are rescaled by their maximum, so masses are relative; ψ is unaffected.
#[derive(Debug, Clone)]
pub struct WeightedLine {
    proj: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl WeightedLine {
    /// Builds from `(projection, log weight)` pairs.
    pub fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let m = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = pairs
            .iter()
            .map(|p| if m.is_finite() { (p.1 - m).exp() } else { 0.0 })
            .collect();
        let n = w.len();
        let mut prefix = vec![0.0; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + w[i];
        }
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + w[i];
        }
        Self {
            proj: pairs.into_iter().map(|p| p.0).collect(),
            prefix,
            suffix,
        }
    }

    pub fn from_samples(samples: &WeightedSamples, u: &Context) -> Result<Self> {
        check_dim(samples.dim(), u.dim())?;
        Ok(Self::new(samples.projections(u)))
    }

    pub fn len(&self) -> usize {
        self.proj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proj.is_empty()
    }
}

impl LineMasses for WeightedLine {
    fn mass_le(&self, t: f64) -> f64 {
        self.prefix[self.proj.partition_point(|p| *p <= t)]
    }

    fn mass_ge(&self, t: f64) -> f64 {
        self.suffix[self.proj.partition_point(|p| *p < t)]
    }
}

fn check_params(eps: f64, tol: f64) -> Result<()> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(param_err(format!("window width ε must be ≥ 0, got {eps}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(param_err(format!("median tolerance must lie in (0, 1), got {tol}")));
    }
    Ok(())
}

fn result(y: f64, psi: f64, iterations: usize, width: f64, flagged: bool) -> MedianResult {
    MedianResult {
        y,
        psi_at_y: psi,
        iterations,
        achieved_tol: (psi - 1.0).abs(),
        bracket_width: width,
        flagged,
    }
}

/// Bisection for `ψ(y) ∈ [1 − tol, 1 + tol]` on `[-1, 1]`.
///
/// The search aims for the inner band `tol / 2` so the returned point stays
/// balanced under a fresh estimate, and accepts the full band once the bracket
/// stops shrinking.
pub fn window_median<M: LineMasses + ?Sized>(m: &M, eps: f64, tol: f64) -> Result<MedianResult> {
    check_params(eps, tol)?;
    let inner = tol / 2.0;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let (psi_lo, psi_hi) = (m.psi(lo, eps), m.psi(hi, eps));
    if psi_lo > 1.0 + inner || psi_hi < 1.0 - inner || psi_lo.is_nan() || psi_hi.is_nan() {
        let y = 0.0;
        return Ok(result(y, m.psi(y, eps), 0, 2.0, true));
    }
    let mut best = if (psi_lo - 1.0).abs() <= (psi_hi - 1.0).abs() {
        (lo, psi_lo)
    } else {
        (hi, psi_hi)
    };
    let mut iterations = 0;
    for it in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations = it;
        let psi = m.psi(mid, eps);
        if (psi - 1.0).abs() < (best.1 - 1.0).abs() {
            best = (mid, psi);
        }
        if (psi - 1.0).abs() <= inner {
            return Ok(result(mid, psi, it, hi - lo, false));
        }
        if psi < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flagged = !((best.1 - 1.0).abs() <= tol);
    Ok(result(best.0, best.1, iterations, hi - lo, flagged))
}

/// `ψ(y)` estimated with one sample set for both masses.
pub fn psi_ratio(state: &DensityState, u: &Context, y: f64, eps: f64, est: &EstimatorConfig) -> Result<f64> {
    check_dim(state.dim(), u.dim())?;
    if !(eps >= 0.0) {
        return Err(param_err(format!("window width ε must be ≥ 0, got {eps}")));
    }
    let samples = WeightedSamples::draw(state, est)?;
    Ok(WeightedLine::from_samples(&samples, u)?.psi(y, eps))
}

/// ε-window median of `state` along `u`, by Monte Carlo.
pub fn eps_window_median(
    state: &DensityState,
    u: &Context,
    eps: f64,
    tol: f64,
    est: &EstimatorConfig,
) -> Result<MedianResult> {
    check_dim(state.dim(), u.dim())?;
    check_params(eps, tol)?;
    let samples = WeightedSamples::draw(state, est)?;
    window_median(&WeightedLine::from_samples(&samples, u)?, eps, tol)
}

pub fn standard_median(state: &DensityState, u: &Context, tol: f64, est: &EstimatorConfig) -> Result<MedianResult> {
    eps_window_median(state, u, 0.0, tol, est)
}
