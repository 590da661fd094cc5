//! The simulated adversary: hidden target, contexts, corruptions and feedback.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::BallSampler;
use crate::error::{param_err, Result};
use crate::model::{norm, Context, CorruptionTotals, Sign};
use crate::rng;

/// Nudge used when a flip is requested at an exact tie, so `z ≠ 0` still flips `sign(0) = +1`.
const TIE_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextStrategy {
    UniformSphere,
    /// `e_{(t−1 mod d)+1}`.
    AxisCycle,
    /// `θ*/‖θ*‖` plus Gaussian noise, renormalized.
    AdversarialTowardTarget { noise: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorruptionPolicy {
    None,
    /// Flips the feedback on rounds `1..=count`.
    FirstRounds { count: usize },
    /// Flips the feedback on `count` distinct rounds drawn uniformly.
    RandomFlipBudget { count: usize },
    /// `|z| = magnitude` every round, pushing the target toward the query.
    DripMagnitude { magnitude: f64 },
    /// Flips whenever the clean distance is the largest seen so far, until the budget runs out.
    TargetedFlip { budget: usize },
}

impl CorruptionPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CorruptionPolicy::DripMagnitude { magnitude } if !(0.0..=1.0).contains(&magnitude) => {
                Err(param_err(format!("drip magnitude must lie in [0, 1], got {magnitude}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionPolicy::None => "none",
            CorruptionPolicy::FirstRounds { .. } => "first_rounds",
            CorruptionPolicy::RandomFlipBudget { .. } => "random_flip_budget",
            CorruptionPolicy::DripMagnitude { .. } => "drip_magnitude",
            CorruptionPolicy::TargetedFlip { .. } => "targeted_flip",
        }
    }
}

/// Uniform draw from `B(0, 1 − margin)`.
pub fn sample_theta(d: usize, margin: f64, seed: u64) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(param_err("dimension must be positive"));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(param_err(format!("margin must lie in [0, 1), got {margin}")));
    }
    let mut theta = vec![0.0; d];
    BallSampler::new(d, seed).next_into(&mut theta);
    theta.iter_mut().for_each(|x| *x *= 1.0 - margin);
    Ok(theta)
}

/// `σ = sign(<u, θ*> + z − y)` with `sign(0) = +1`.
pub fn feedback(theta_star: &[f64], u: &Context, z: f64, y: f64) -> Sign {
    Sign::of(u.dot(theta_star) + z - y)
}

/// One run's adversary. Contexts are a pure function of `(seed, t)`; the
/// corruption policy may keep state across rounds.
#[derive(Debug, Clone)]
pub struct Environment {
    theta_star: Vec<f64>,
    contexts: ContextStrategy,
    policy: CorruptionPolicy,
    seed: u64,
    flips: Vec<bool>,
    spent: usize,
    max_gap: f64,
    totals: CorruptionTotals,
}

impl Environment {
    pub fn new(
        theta_star: Vec<f64>,
        contexts: ContextStrategy,
        policy: CorruptionPolicy,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        if theta_star.is_empty() {
            return Err(param_err("dimension must be positive"));
        }
        if !(norm(&theta_star) <= 1.0) {
            return Err(param_err("θ* must lie in the unit ball"));
        }
        if let ContextStrategy::AdversarialTowardTarget { noise } = contexts {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(param_err(format!("context noise must be ≥ 0, got {noise}")));
            }
        }
        policy.validate()?;
        let flips = match policy {
            CorruptionPolicy::RandomFlipBudget { count } => {
                let mut r = rng::stream(rng::derive_seed(seed, rng::TAG_CORRUPTION));
                let mut f = vec![false; horizon + 1];
                for i in index::sample(&mut r, horizon, count.min(horizon)) {
                    f[i + 1] = true;
                }
                f
            }
            _ => Vec::new(),
        };
        Ok(Self {
            theta_star,
            contexts,
            policy,
            seed,
            flips,
            spent: 0,
            max_gap: 0.0,
            totals: CorruptionTotals::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn policy(&self) -> &CorruptionPolicy {
        &self.policy
    }

    /// Totals of every `z` returned by [`Environment::corrupt`] so far.
    pub fn totals(&self) -> CorruptionTotals {
        self.totals
    }

    pub fn next_context(&self, t: usize) -> Result<Context> {
        if t == 0 {
            return Err(param_err("rounds are numbered from 1"));
        }
        let d = self.dim();
        let mut r = rng::round_stream(self.seed, rng::TAG_CONTEXT, t as u64);
        match self.contexts {
            ContextStrategy::AxisCycle => Context::axis(d, (t - 1) % d),
            ContextStrategy::UniformSphere => loop {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r)).collect();
                if norm(&g) > 0.0 {
                    return Context::from_direction(&g);
                }
            },
            ContextStrategy::AdversarialTowardTarget { noise } => {
                let n = norm(&self.theta_star);
                let dir: Vec<f64> = if n > 0.0 {
                    self.theta_star.iter().map(|x| x / n).collect()
                } else {
                    let mut e = vec![0.0; d];
                    e[0] = 1.0;
                    e
                };
                let v: Vec<f64> = dir
                    .iter()
                    .map(|x| {
                        let g: f64 = StandardNormal.sample(&mut r);
                        x + noise * g
                    })
                    .collect();
                if norm(&v) > 0.0 {
                    Context::from_direction(&v)
                } else {
                    Context::from_direction(&dir)
                }
            }
        }
    }

    /// The corruption for round `t`. The adversary may look at the learner's
    /// pending answer `y`; the result keeps `clean_target + z` inside `[-1, 1]`.
    pub fn corrupt(&mut self, t: usize, clean_target: f64, y: f64) -> f64 {
        let gap = (clean_target - y).abs();
        let flip = || {
            let diff = clean_target - y;
            if diff == 0.0 {
                -TIE_NUDGE
            } else {
                -2.0 * diff
            }
        };
        let z = match self.policy {
            CorruptionPolicy::None => 0.0,
            CorruptionPolicy::FirstRounds { count } => {
                if t <= count {
                    flip()
                } else {
                    0.0
                }
            }
            CorruptionPolicy::RandomFlipBudget { .. } => {
                if self.flips.get(t).copied().unwrap_or(false) {
                    flip()
                } else {
                    0.0
                }
            }
            CorruptionPolicy::DripMagnitude { magnitude } => {
                if y > clean_target {
                    magnitude
                } else {
                    -magnitude
                }
            }
            CorruptionPolicy::TargetedFlip { budget } => {
                let hit = self.spent < budget && gap >= self.max_gap;
                self.max_gap = self.max_gap.max(gap);
                if hit {
                    self.spent += 1;
                    flip()
                } else {
                    0.0
                }
            }
        };
        let z = z.clamp(-1.0, 1.0).clamp(-1.0 - clean_target, 1.0 - clean_target);
        if z != 0.0 {
            self.totals.c0 += 1;
        }
        self.totals.c1 += z.abs();
        z
    }
}
