//! Factorized densities over the unit ball.
//!
//! A [`DensityState`] is the uniform density on `B(0,1)` times an append-only
//! history of multiplicative factors. Slab factors come from the ε-window
//! median learner, linear factors from the log-concave centroid learner; a
//! state never mixes the two. Pointwise evaluation costs `O(t·d)`.
//!
//! Integrals are estimated by importance sampling from the uniform ball
//! ([`WeightedSamples`]); [`WeightedCloud`] keeps a fixed sample set and updates
//! its weights incrementally as factors are appended.

mod cloud;
mod sampler;
mod samples;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, param_err, Error, Result};
use crate::model::{dot, norm, Context, Sign};

pub use cloud::{WeightedCloud, DEFENSIVE_WEIGHT, REGENERATE_ESS_FRACTION};
pub use sampler::{ball_volume, unit_ball_volume, BallSampler};
pub use samples::{CentroidEstimate, MassEstimate, WeightedSamples};

/// Returned centroids are pulled inside this radius so the next linear factor stays positive.
pub const CENTROID_MAX_NORM: f64 = 1.0 - 1e-9;

const LN_3_2: f64 = 0.405_465_108_108_164_4;

/// One multiplicative update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `3/2` where `σ(<u,x> − y) ≥ ε/2`, `1/2` where it is `≤ −ε/2`, `1` in between.
    Slab {
        u: Context,
        y: f64,
        sigma: Sign,
        eps: f64,
    },
    /// `1 + σ<u, x − cg>/3`.
    Linear { u: Context, cg: Vec<f64>, sigma: Sign },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Slab,
    Linear,
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::Slab { .. } => FactorKind::Slab,
            Factor::Linear { .. } => FactorKind::Linear,
        }
    }

    pub fn context(&self) -> &Context {
        match self {
            Factor::Slab { u, .. } | Factor::Linear { u, .. } => u,
        }
    }

    /// The multiplier as a function of the projection `p = <u, x>`.
    pub fn line_multiplier(&self) -> LineMultiplier {
        match self {
            Factor::Slab { y, sigma, eps, .. } => LineMultiplier::Slab {
                y: *y,
                sigma: sigma.value(),
                half_eps: eps / 2.0,
            },
            Factor::Linear { u, cg, sigma } => LineMultiplier::Linear {
                offset: u.dot(cg),
                sigma: sigma.value(),
            },
        }
    }

    pub fn multiplier(&self, x: &[f64]) -> f64 {
        self.line_multiplier().at(self.context().dot(x))
    }
}

/// A factor reduced to a function of the projection onto its context.
#[derive(Debug, Clone, Copy)]
pub enum LineMultiplier {
    Slab { y: f64, sigma: f64, half_eps: f64 },
    Linear { offset: f64, sigma: f64 },
}

impl LineMultiplier {
    #[inline]
    pub fn at(&self, p: f64) -> f64 {
        match *self {
            LineMultiplier::Slab { y, sigma, half_eps } => {
                let s = sigma * (p - y);
                if s >= half_eps {
                    1.5
                } else if s <= -half_eps {
                    0.5
                } else {
                    1.0
                }
            }
            LineMultiplier::Linear { offset, sigma } => 1.0 + sigma * (p - offset) / 3.0,
        }
    }

    #[inline]
    pub fn ln_at(&self, p: f64) -> f64 {
        match *self {
            LineMultiplier::Slab { y, sigma, half_eps } => {
                let s = sigma * (p - y);
                if s >= half_eps {
                    LN_3_2
                } else if s <= -half_eps {
                    -std::f64::consts::LN_2
                } else {
                    0.0
                }
            }
            LineMultiplier::Linear { .. } => self.at(p).ln(),
        }
    }
}

/// Uniform base density times a factor history.
///
/// Appending consumes the state and shares the history copy-on-write: a clone
/// kept by the caller is left untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    d: usize,
    base_log_density: f64,
    factors: Arc<Vec<Factor>>,
}

impl DensityState {
    /// Uniform density on `B(0,1)` in dimension `d`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(param_err("dimension must be >= 1"));
        }
        Ok(Self {
            d,
            base_log_density: -unit_ball_volume(d).ln(),
            factors: Arc::new(Vec::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `−ln Vol(B(0,1))`.
    pub fn base_log_density(&self) -> f64 {
        self.base_log_density
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn kind(&self) -> Option<FactorKind> {
        self.factors.first().map(Factor::kind)
    }

    /// Log density at `x`; `-inf` outside the unit ball.
    pub fn log_evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(param_err("evaluation point must be finite"));
        }
        Ok(self.log_evaluate_unchecked(x))
    }

    pub(crate) fn log_evaluate_unchecked(&self, x: &[f64]) -> f64 {
        if dot(x, x) > 1.0 {
            return f64::NEG_INFINITY;
        }
        self.factors
            .iter()
            .fold(self.base_log_density, |acc, f| {
                acc + f.line_multiplier().ln_at(f.context().dot(x))
            })
    }

    /// Density at `x`: zero outside `B(0,1)`, base times all multipliers inside.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(param_err("evaluation point must be finite"));
        }
        if dot(x, x) > 1.0 {
            return Ok(0.0);
        }
        Ok(self
            .factors
            .iter()
            .fold(self.base_log_density.exp(), |acc, f| acc * f.multiplier(x)))
    }

    /// Appends a slab factor (ε-window median update; `eps = 0` gives the plain-median update).
    pub fn apply_slab_update(self, u: &Context, y: f64, sigma: Sign, eps: f64) -> Result<Self> {
        self.push(Factor::Slab {
            u: u.clone(),
            y,
            sigma,
            eps,
        })
    }

    /// Appends a linear factor `1 + σ<u, x − cg>/3`; requires `‖cg‖ < 1`.
    pub fn apply_linear_update(self, u: &Context, cg: &[f64], sigma: Sign) -> Result<Self> {
        self.push(Factor::Linear {
            u: u.clone(),
            cg: cg.to_vec(),
            sigma,
        })
    }

    /// Appends any factor after validating dimension, parameters and kind purity.
    pub fn push(mut self, factor: Factor) -> Result<Self> {
        check_dim(self.d, factor.context().dim())?;
        match &factor {
            Factor::Slab { y, eps, .. } => {
                if !(*eps >= 0.0 && eps.is_finite()) || !y.is_finite() {
                    return Err(param_err(format!(
                        "slab update needs finite y and ε >= 0, got y={y}, ε={eps}"
                    )));
                }
            }
            Factor::Linear { cg, .. } => {
                check_dim(self.d, cg.len())?;
                let n = norm(cg);
                if !(n < 1.0) {
                    return Err(param_err(format!("centroid norm {n} must be < 1")));
                }
            }
        }
        if let Some(k) = self.kind() {
            if k != factor.kind() {
                return Err(Error::Usage(format!(
                    "cannot append a {:?} factor to a {:?} history",
                    factor.kind(),
                    k
                )));
            }
        }
        Arc::make_mut(&mut self.factors).push(factor);
        Ok(self)
    }

    /// The state after its first `n` factors.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            d: self.d,
            base_log_density: self.base_log_density,
            factors: Arc::new(self.factors[..n].to_vec()),
        }
    }
}

/// `uniform_ball_density(d)`.
pub fn uniform_ball_density(d: usize) -> Result<DensityState> {
    DensityState::uniform(d)
}

/// Monte Carlo budget for the density estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub sample_count: usize,
    pub seed: u64,
    /// When set, mass estimates double their sample size until the standard
    /// error drops below this value (or `max_samples` is reached).
    #[serde(default)]
    pub target_std_err: Option<f64>,
    pub max_samples: usize,
}

impl EstimatorConfig {
    pub fn new(sample_count: usize, seed: u64) -> Self {
        Self {
            sample_count,
            seed,
            target_std_err: None,
            max_samples: sample_count,
        }
    }

    pub fn with_max_samples(mut self, max_samples: usize) -> Self {
        self.max_samples = max_samples;
        self
    }

    pub fn with_target_std_err(mut self, target: f64) -> Self {
        self.target_std_err = Some(target);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(param_err("sample_count must be positive"));
        }
        if self.sample_count > self.max_samples {
            return Err(param_err(format!(
                "sample_count {} exceeds max_samples {}",
                self.sample_count, self.max_samples
            )));
        }
        if let Some(t) = self.target_std_err {
            if !(t > 0.0) {
                return Err(param_err("target_std_err must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::new(50_000, 0)
    }
}

/// Which side of the hyperplane `<u, x> = threshold` to integrate over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Le,
    Ge,
}

fn grow_until<F>(state: &DensityState, est: &EstimatorConfig, mut f: F) -> Result<MassEstimate>
where
    F: FnMut(&WeightedSamples) -> MassEstimate,
{
    est.validate()?;
    let mut samples = WeightedSamples::draw(state, est)?;
    loop {
        let m = f(&samples);
        let done = match est.target_std_err {
            Some(target) => m.std_err <= target,
            None => true,
        };
        if done || samples.len() >= est.max_samples {
            return Ok(m);
        }
        let next = (samples.len() * 2).min(est.max_samples);
        samples.extend_to(state, next);
    }
}

/// Estimated `∫ f(x) 1{<u,x> ≤ threshold}` (or `≥`) by uniform importance sampling.
pub fn halfspace_mass(
    state: &DensityState,
    u: &Context,
    threshold: f64,
    side: Side,
    est: &EstimatorConfig,
) -> Result<MassEstimate> {
    check_dim(state.dim(), u.dim())?;
    grow_until(state, est, |s| s.halfspace_mass(u, threshold, side))
}

/// Estimated `∫ f(x) dx` over the ball.
pub fn total_mass(state: &DensityState, est: &EstimatorConfig) -> Result<MassEstimate> {
    grow_until(state, est, WeightedSamples::total_mass)
}

/// Self-normalized estimate of the centroid `∫x f / ∫f`.
///
/// Doubles the sample size until every coordinate's standard error is at most
/// `delta / 3` or `max_samples` is reached; the result records whether the
/// target was met. The point is clamped to norm [`CENTROID_MAX_NORM`].
pub fn centroid(state: &DensityState, est: &EstimatorConfig, delta: f64) -> Result<CentroidEstimate> {
    if !(delta > 0.0) {
        return Err(param_err(format!("centroid accuracy δ must be positive, got {delta}")));
    }
    est.validate()?;
    let mut samples = WeightedSamples::draw(state, est)?;
    loop {
        let c = samples.centroid(delta);
        if c.target_met || samples.len() >= est.max_samples {
            return Ok(c);
        }
        let next = (samples.len() * 2).min(est.max_samples);
        samples.extend_to(state, next);
    }
}

pub(crate) fn clamp_to_open_ball(p: &mut [f64]) -> bool {
    let n = norm(p);
    if n > CENTROID_MAX_NORM {
        let s = CENTROID_MAX_NORM / n;
        p.iter_mut().for_each(|v| *v *= s);
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn e1() -> Context {
        Context::axis(1, 0).unwrap()
    }

    fn three_piece() -> DensityState {
        DensityState::uniform(1)
            .unwrap()
            .apply_slab_update(&e1(), 0.0, Sign::Plus, 0.2)
            .unwrap()
    }

    #[test]
    fn uniform_values() {
        let s1 = DensityState::uniform(1).unwrap();
        assert_relative_eq!(s1.evaluate(&[0.0]).unwrap(), 0.5);
        let s2 = DensityState::uniform(2).unwrap();
        assert_relative_eq!(s2.evaluate(&[0.0, 0.0]).unwrap(), 1.0 / PI, max_relative = 1e-15);
        for d in 1..=4 {
            let s = DensityState::uniform(d).unwrap();
            let mut x = vec![0.0; d];
            x[0] = 1.5;
            assert_eq!(s.evaluate(&x).unwrap(), 0.0);
            assert_eq!(s.log_evaluate(&x).unwrap(), f64::NEG_INFINITY);
        }
        assert!(DensityState::uniform(0).is_err());
        assert!(s2.evaluate(&[0.0]).is_err());
    }

    #[test]
    fn slab_update_values() {
        let s = three_piece();
        assert_relative_eq!(s.evaluate(&[0.5]).unwrap(), 0.75);
        assert_relative_eq!(s.evaluate(&[-0.5]).unwrap(), 0.25);
        assert_relative_eq!(s.evaluate(&[0.05]).unwrap(), 0.5);
        // the window branch leaves the query point itself unchanged
        assert_relative_eq!(s.evaluate(&[0.0]).unwrap(), 0.5);
        // boundaries: ≥ ε/2 is the 3/2 branch, ≤ −ε/2 the 1/2 branch
        assert_relative_eq!(s.evaluate(&[0.1]).unwrap(), 0.75);
        assert_relative_eq!(s.evaluate(&[-0.1]).unwrap(), 0.25);
        assert_relative_eq!(s.log_evaluate(&[0.5]).unwrap(), 0.75f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn plain_median_update_has_two_branches() {
        let s = DensityState::uniform(1)
            .unwrap()
            .apply_slab_update(&e1(), 0.0, Sign::Plus, 0.0)
            .unwrap();
        assert_relative_eq!(s.evaluate(&[0.0]).unwrap(), 0.75);
        assert_relative_eq!(s.evaluate(&[1e-9]).unwrap(), 0.75);
        assert_relative_eq!(s.evaluate(&[-1e-9]).unwrap(), 0.25);
    }

    #[test]
    fn linear_update_values() {
        let s = DensityState::uniform(1)
            .unwrap()
            .apply_linear_update(&e1(), &[0.0], Sign::Plus)
            .unwrap();
        assert_relative_eq!(s.evaluate(&[0.6]).unwrap(), 0.6, max_relative = 1e-15);
        for &x in &[-1.0, -0.3, 0.0, 0.4, 1.0] {
            assert_relative_eq!(s.evaluate(&[x]).unwrap(), 0.5 * (1.0 + x / 3.0), max_relative = 1e-15);
        }
    }

    #[test]
    fn linear_update_rejects_boundary_centroid() {
        let s = DensityState::uniform(2).unwrap();
        let u = Context::axis(2, 0).unwrap();
        assert!(s.clone().apply_linear_update(&u, &[1.0, 0.0], Sign::Plus).is_err());
        assert!(s.clone().apply_linear_update(&u, &[0.8, 0.7], Sign::Plus).is_err());
        assert!(s.apply_linear_update(&u, &[0.5, 0.5], Sign::Minus).is_ok());
    }

    #[test]
    fn min_linear_factor_over_ball() {
        // minimum of 1 + σ<u, x − cg>/3 over the ball is 1 − (1 + ‖cg‖)/3 > 0
        let u = Context::axis(2, 0).unwrap();
        let cg = [0.3, 0.4];
        let f = Factor::Linear {
            u: u.clone(),
            cg: cg.to_vec(),
            sigma: Sign::Plus,
        };
        let worst = [-1.0, 0.0];
        let got = f.multiplier(&worst);
        assert_abs_diff_eq!(got, 1.0 - (1.0 + 0.3) / 3.0, epsilon = 1e-15);
        assert!(got >= 1.0 - (1.0 + norm(&cg)) / 3.0);
        assert!(got > 1.0 / 3.0);
    }

    #[test]
    fn no_kind_mixing() {
        let s = three_piece();
        let err = s.apply_linear_update(&e1(), &[0.0], Sign::Plus).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        let s = DensityState::uniform(1)
            .unwrap()
            .apply_linear_update(&e1(), &[0.0], Sign::Plus)
            .unwrap();
        assert!(s.apply_slab_update(&e1(), 0.0, Sign::Plus, 0.1).is_err());
    }

    #[test]
    fn append_leaves_clones_untouched() {
        let a = three_piece();
        let keep = a.clone();
        let b = a.apply_slab_update(&e1(), 0.3, Sign::Minus, 0.2).unwrap();
        assert_eq!(keep.len(), 1);
        assert_eq!(b.len(), 2);
        assert_eq!(b.prefix(1).factors(), keep.factors());
    }

    #[test]
    fn halfspace_mass_examples() {
        let est = EstimatorConfig::new(100_000, 11);
        let s = DensityState::uniform(1).unwrap();
        let m = halfspace_mass(&s, &e1(), 0.0, Side::Le, &est).unwrap();
        assert!((m.mass - 0.5).abs() < 4.0 * m.std_err, "{m:?}");
        let m = halfspace_mass(&s, &e1(), 1.0, Side::Le, &est).unwrap();
        assert_relative_eq!(m.mass, 1.0, max_relative = 1e-12);
        assert_eq!(m.std_err, 0.0);

        // 0.25 · 0.9 + 0.5 · 0.2
        let m = halfspace_mass(&three_piece(), &e1(), 0.1, Side::Le, &est).unwrap();
        assert!((m.mass - 0.325).abs() < 4.0 * m.std_err, "{m:?}");
        let m = halfspace_mass(&three_piece(), &e1(), 2.0, Side::Ge, &est).unwrap();
        assert_eq!(m.mass, 0.0);
    }

    #[test]
    fn total_mass_uniform() {
        for d in 1..=3 {
            let s = DensityState::uniform(d).unwrap();
            let m = total_mass(&s, &EstimatorConfig::new(100_000, d as u64)).unwrap();
            assert_relative_eq!(m.mass, 1.0, max_relative = 1e-12);
        }
        let m = total_mass(&three_piece(), &EstimatorConfig::new(100_000, 5)).unwrap();
        // y = 0 is the window median of the uniform density: 0.675 + 0.1 + 0.225 = 1
        assert!((m.mass - 1.0).abs() < 3.0 * m.std_err, "{m:?}");
    }

    #[test]
    fn adaptive_mass_respects_target() {
        let est = EstimatorConfig::new(1_000, 3)
            .with_max_samples(64_000)
            .with_target_std_err(0.004);
        let m = halfspace_mass(&DensityState::uniform(2).unwrap(), &Context::axis(2, 1).unwrap(), 0.2, Side::Ge, &est)
            .unwrap();
        assert!(m.std_err <= 0.004 || m.samples == 64_000);
        assert!(m.samples > 1_000);
    }

    #[test]
    fn centroid_examples() {
        let delta = 0.01;
        let est = EstimatorConfig::new(20_000, 9).with_max_samples(400_000);
        for d in 1..=3 {
            let c = centroid(&DensityState::uniform(d).unwrap(), &est, delta).unwrap();
            assert!(norm(&c.point) <= delta, "d={d}: {c:?}");
        }
        let lin = |sigma| {
            DensityState::uniform(1)
                .unwrap()
                .apply_linear_update(&e1(), &[0.0], sigma)
                .unwrap()
        };
        // ∫ x · (1 + x/3)/2 dx over [−1, 1] = 1/9
        let c = centroid(&lin(Sign::Plus), &est, delta).unwrap();
        assert!((c.point[0] - 1.0 / 9.0).abs() <= delta, "{c:?}");
        let c = centroid(&lin(Sign::Minus), &est, delta).unwrap();
        assert!((c.point[0] + 1.0 / 9.0).abs() <= delta, "{c:?}");
        assert!(centroid(&lin(Sign::Minus), &est, 0.0).is_err());
    }

    #[test]
    fn centroid_reports_unmet_target() {
        let est = EstimatorConfig::new(1_000, 1);
        let c = centroid(&DensityState::uniform(2).unwrap(), &est, 1e-6).unwrap();
        assert!(!c.target_met);
        assert_eq!(c.samples, 1_000);
        assert!(c.max_std_err() > 1e-6 / 3.0);
    }

    #[test]
    fn estimates_are_deterministic() {
        let s = three_piece();
        let est = EstimatorConfig::new(10_000, 42);
        let a = halfspace_mass(&s, &e1(), 0.3, Side::Ge, &est).unwrap();
        let b = halfspace_mass(&s, &e1(), 0.3, Side::Ge, &est).unwrap();
        assert_eq!(a.mass.to_bits(), b.mass.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn estimator_validation() {
        assert!(EstimatorConfig::new(0, 0).validate().is_err());
        assert!(EstimatorConfig::new(10, 0).with_max_samples(5).validate().is_err());
        assert!(EstimatorConfig::new(10, 0).with_target_std_err(0.0).validate().is_err());
    }

    fn linear_history(d: usize, steps: &[(Vec<f64>, Vec<f64>, bool)]) -> DensityState {
        let mut s = DensityState::uniform(d).unwrap();
        for (dir, cg, plus) in steps {
            let u = Context::from_direction(dir).unwrap();
            let mut cg = cg.clone();
            clamp_to_open_ball(&mut cg);
            let sig = if *plus { Sign::Plus } else { Sign::Minus };
            s = s.apply_linear_update(&u, &cg, sig).unwrap();
        }
        s
    }

    fn ball_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, d).prop_map(|mut v| {
            let n = norm(&v);
            if n > 0.999 {
                v.iter_mut().for_each(|x| *x *= 0.999 / n);
            }
            v
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // log f(λa + (1−λ)b) ≥ λ log f(a) + (1−λ) log f(b) for linear histories
        #[test]
        fn linear_histories_are_log_concave(
            steps in prop::collection::vec(
                (prop::collection::vec(-1.0f64..1.0, 2), prop::collection::vec(-0.7f64..0.7, 2), any::<bool>()),
                1..40,
            ),
            a in ball_point(2),
            b in ball_point(2),
            lambda in 0.0f64..=1.0,
        ) {
            prop_assume!(steps.iter().all(|(u, _, _)| norm(u) > 1e-3));
            let s = linear_history(2, &steps);
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let lhs = s.log_evaluate(&mid).unwrap();
            let rhs = lambda * s.log_evaluate(&a).unwrap() + (1.0 - lambda) * s.log_evaluate(&b).unwrap();
            prop_assert!(lhs >= rhs - 1e-9, "lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn linear_factors_exceed_one_third(
            steps in prop::collection::vec(
                (prop::collection::vec(-1.0f64..1.0, 3), prop::collection::vec(-0.57f64..0.57, 3), any::<bool>()),
                1..20,
            ),
            x in ball_point(3),
        ) {
            prop_assume!(steps.iter().all(|(u, _, _)| norm(u) > 1e-3));
            let s = linear_history(3, &steps);
            for f in s.factors() {
                prop_assert!(f.multiplier(&x) > 1.0 / 3.0);
            }
            prop_assert!(s.evaluate(&x).unwrap() > 0.0);
        }

        #[test]
        fn density_nonnegative_and_log_consistent(
            ys in prop::collection::vec((-1.0f64..1.0, any::<bool>(), any::<bool>()), 0..30),
            x in -1.2f64..1.2,
        ) {
            let mut s = DensityState::uniform(1).unwrap();
            for (y, plus, pos) in ys {
                let u = if pos { Context::axis(1, 0).unwrap() } else { Context::new(vec![-1.0]).unwrap() };
                s = s.apply_slab_update(&u, y, if plus { Sign::Plus } else { Sign::Minus }, 0.1).unwrap();
            }
            let v = s.evaluate(&[x]).unwrap();
            prop_assert!(v >= 0.0);
            if x.abs() > 1.0 {
                prop_assert_eq!(v, 0.0);
            } else {
                let lv = s.log_evaluate(&[x]).unwrap();
                prop_assert!((lv.exp() - v).abs() <= 1e-12 * v.max(1e-300));
            }
        }
    }
}
