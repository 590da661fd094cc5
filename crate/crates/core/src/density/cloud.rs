use super::{CentroidEstimate, DensityState, EstimatorConfig, Factor, MassEstimate, Side, WeightedSamples};
use crate::error::{check_dim, param_err, Result};
use crate::model::Context;
use crate::rng;

/// Regenerate once the effective sample size falls below this fraction of the draws.
pub const REGENERATE_ESS_FRACTION: f64 = 0.1;
/// Mixture weight kept on the whole ball when regenerating.
pub const DEFENSIVE_WEIGHT: f64 = 0.1;
const SPREAD_QUANTILE: f64 = 0.99;
const SPREAD_INFLATION: f64 = 1.5;

/// A density together with an incrementally reweighted sample set.
///
/// Appending a factor updates the cached log weights in `O(N·d)` instead of
/// re-evaluating the whole history. Until the first regeneration every
/// estimate equals what the stateless estimators in [`crate::density`] return
/// for the same seed and sample count.
///
/// When the effective sample size drops below [`REGENERATE_ESS_FRACTION`] of
/// the draws (and below half of what the last regeneration achieved), the
/// draws are replaced by a defensive mixture centred on the current weighted
/// mean, with radius 1.5 times the weighted 99% distance quantile, and
/// reweighted over the full history.
#[derive(Debug, Clone)]
pub struct WeightedCloud {
    state: DensityState,
    samples: WeightedSamples,
    est: EstimatorConfig,
    regenerations: usize,
    ess_after_regeneration: f64,
}

impl WeightedCloud {
    pub fn new(state: DensityState, est: EstimatorConfig) -> Result<Self> {
        let samples = WeightedSamples::draw(&state, &est)?;
        let ess = samples.ess();
        Ok(Self {
            state,
            samples,
            est,
            regenerations: 0,
            ess_after_regeneration: ess,
        })
    }

    pub fn regenerations(&self) -> usize {
        self.regenerations
    }

    pub fn ess(&self) -> f64 {
        self.samples.ess()
    }

    fn maybe_regenerate(&mut self) {
        let n = self.samples.len();
        let ess = self.samples.ess();
        if ess >= REGENERATE_ESS_FRACTION * n as f64 || ess >= 0.5 * self.ess_after_regeneration {
            return;
        }
        let (center, r) = self.samples.spread(SPREAD_QUANTILE);
        let radius = (SPREAD_INFLATION * r).clamp(1e-9, 2.0);
        self.regenerations += 1;
        let seed = rng::derive_seed(self.est.seed, self.regenerations as u64);
        self.samples.regenerate(&self.state, n, seed, &center, radius, DEFENSIVE_WEIGHT);
        self.ess_after_regeneration = self.samples.ess();
    }

    pub fn state(&self) -> &DensityState {
        &self.state
    }

    pub fn samples(&self) -> &WeightedSamples {
        &self.samples
    }

    pub fn estimator(&self) -> &EstimatorConfig {
        &self.est
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends a factor to the density and reweights the samples.
    pub fn push(&mut self, factor: Factor) -> Result<()> {
        let state = std::mem::replace(&mut self.state, DensityState::uniform(1)?);
        match state.clone().push(factor) {
            Ok(next) => {
                self.samples.apply(next.factors().last().expect("just pushed"));
                self.state = next;
                self.maybe_regenerate();
                Ok(())
            }
            Err(e) => {
                self.state = state;
                Err(e)
            }
        }
    }

    /// Grows the sample set (up to `max_samples`), evaluating new draws over the full history.
    pub fn grow_to(&mut self, n: usize) {
        let n = n.min(self.est.max_samples);
        self.samples.extend_to(&self.state, n);
    }

    pub fn total_mass(&self) -> MassEstimate {
        self.samples.total_mass()
    }

    pub fn halfspace_mass(&self, u: &Context, threshold: f64, side: Side) -> Result<MassEstimate> {
        check_dim(self.state.dim(), u.dim())?;
        Ok(self.samples.halfspace_mass(u, threshold, side))
    }

    /// Adaptive centroid: doubles the sample set until `std_err ≤ δ/3` or `max_samples`.
    pub fn centroid(&mut self, delta: f64) -> Result<CentroidEstimate> {
        if !(delta > 0.0) {
            return Err(param_err(format!("centroid accuracy δ must be positive, got {delta}")));
        }
        loop {
            let c = self.samples.centroid(delta);
            if c.target_met || self.samples.len() >= self.est.max_samples {
                return Ok(c);
            }
            let next = self.samples.len() * 2;
            self.grow_to(next);
        }
    }
}
