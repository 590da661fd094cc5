use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{clamp_to_open_ball, unit_ball_volume, ball_volume, BallSampler, DensityState, EstimatorConfig, Factor, Side};
use crate::error::Result;
use crate::model::{norm, Context};
use crate::rng;

/// A Monte Carlo mass estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub mass: f64,
    pub std_err: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidEstimate {
    pub point: Vec<f64>,
    /// Per-coordinate standard error of the self-normalized estimate.
    pub std_err: Vec<f64>,
    pub samples: usize,
    /// Whether every coordinate reached `std_err ≤ δ/3`.
    pub target_met: bool,
    /// Whether the raw estimate had to be pulled inside the ball.
    pub clamped: bool,
}

impl CentroidEstimate {
    pub fn max_std_err(&self) -> f64 {
        self.std_err.iter().copied().fold(0.0, f64::max)
    }
}

/// Defensive mixture proposal: the whole ball with probability `alpha`,
/// otherwise `B(center, radius)`.
#[derive(Debug, Clone)]
struct Mixture {
    center: Vec<f64>,
    radius: f64,
    alpha: f64,
    ln_q_ball: f64,
    ln_q_local: f64,
    pick: ChaCha8Rng,
}

impl Mixture {
    fn ln_q(&self, x: &[f64]) -> f64 {
        let in_ball = norm(x) <= 1.0;
        let dist: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        match (in_ball, dist <= self.radius) {
            (true, true) => {
                let m = self.ln_q_ball.max(self.ln_q_local);
                m + ((self.ln_q_ball - m).exp() + (self.ln_q_local - m).exp()).ln()
            }
            (true, false) => self.ln_q_ball,
            (false, true) => self.ln_q_local,
            (false, false) => f64::NEG_INFINITY,
        }
    }
}

/// Importance-weighted draws with the log density of a state at each draw.
///
/// Draws start uniform on `B(0,1)`; after [`WeightedSamples::regenerate`] they
/// come from a defensive mixture and carry weights `f/q`. The draws are a
/// prefix-stable stream: extending to `n` samples keeps the first ones, so
/// estimates with the same seed use common random numbers.
#[derive(Debug, Clone)]
pub struct WeightedSamples {
    d: usize,
    sampler: BallSampler,
    mixture: Option<Mixture>,
    points: Vec<f64>,
    log_w: Vec<f64>,
    log_vol: f64,
}

impl WeightedSamples {
    /// Draws `est.sample_count` points and evaluates `state` at each.
    pub fn draw(state: &DensityState, est: &EstimatorConfig) -> Result<Self> {
        est.validate()?;
        let d = state.dim();
        let mut s = Self {
            d,
            sampler: BallSampler::new(d, est.seed),
            mixture: None,
            points: Vec::new(),
            log_w: Vec::new(),
            log_vol: unit_ball_volume(d).ln(),
        };
        s.extend_to(state, est.sample_count);
        Ok(s)
    }

    /// Draws more points from the same stream until there are `n`.
    pub fn extend_to(&mut self, state: &DensityState, n: usize) {
        let have = self.len();
        if n <= have {
            return;
        }
        self.sampler.extend(&mut self.points, n - have);
        let d = self.d;
        match &mut self.mixture {
            None => self.log_w.extend(
                self.points[have * d..]
                    .chunks_exact(d)
                    .map(|x| state.log_evaluate_unchecked(x)),
            ),
            Some(mix) => {
                for x in self.points[have * d..].chunks_exact_mut(d) {
                    if mix.pick.random::<f64>() >= mix.alpha {
                        for (xi, c) in x.iter_mut().zip(&mix.center) {
                            *xi = c + mix.radius * *xi;
                        }
                    }
                    let lw = if norm(x) <= 1.0 {
                        state.log_evaluate_unchecked(x) - mix.ln_q(x)
                    } else {
                        f64::NEG_INFINITY
                    };
                    self.log_w.push(lw);
                }
            }
        }
    }

    /// Replaces the draws with `n` fresh ones from a defensive mixture that puts
    /// weight `alpha` on the whole ball and the rest on `B(center, radius)`.
    pub fn regenerate(&mut self, state: &DensityState, n: usize, seed: u64, center: &[f64], radius: f64, alpha: f64) {
        let d = self.d;
        assert!(center.len() == d && radius > 0.0 && alpha > 0.0 && alpha <= 1.0);
        self.sampler = BallSampler::new(d, seed);
        self.mixture = Some(Mixture {
            center: center.to_vec(),
            radius,
            alpha,
            ln_q_ball: (alpha / unit_ball_volume(d)).ln(),
            ln_q_local: ((1.0 - alpha) / ball_volume(d, radius)).ln(),
            pick: rng::stream(rng::derive_seed(seed, rng::TAG_ESTIMATOR)),
        });
        self.points.clear();
        self.log_w.clear();
        self.log_vol = 0.0;
        self.extend_to(state, n);
    }

    /// Effective sample size `(Σw)² / Σw²`.
    pub fn ess(&self) -> f64 {
        let m = self.max_log_w();
        if !m.is_finite() {
            return 0.0;
        }
        let (mut s, mut s2) = (0.0, 0.0);
        for lw in &self.log_w {
            let w = (lw - m).exp();
            s += w;
            s2 += w * w;
        }
        s * s / s2
    }

    /// Weighted mean of the draws and the weighted `q`-quantile of their distance to it.
    pub fn spread(&self, q: f64) -> (Vec<f64>, f64) {
        let d = self.d;
        let m = self.max_log_w();
        let w: Vec<f64> = self.log_w.iter().map(|lw| (lw - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut center = vec![0.0; d];
        for (x, wi) in self.points.chunks_exact(d).zip(&w) {
            for (c, xi) in center.iter_mut().zip(x) {
                *c += wi * xi / total;
            }
        }
        let mut dist: Vec<(f64, f64)> = self
            .points
            .chunks_exact(d)
            .zip(&w)
            .filter(|(_, wi)| **wi > 0.0)
            .map(|(x, wi)| (x.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt(), *wi))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (r, wi) in &dist {
            acc += wi;
            if acc >= q * total {
                return (center, *r);
            }
        }
        (center, dist.last().map_or(0.0, |p| p.0))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Multiplies every cached weight by one more factor.
    pub fn apply(&mut self, factor: &Factor) {
        let lm = factor.line_multiplier();
        let u = factor.context();
        for (x, lw) in self.points.chunks_exact(self.d).zip(self.log_w.iter_mut()) {
            *lw += lm.ln_at(u.dot(x));
        }
    }

    /// Projections `<u, x>` paired with log weights.
    pub fn projections(&self, u: &Context) -> Vec<(f64, f64)> {
        self.points
            .chunks_exact(self.d)
            .zip(&self.log_w)
            .map(|(x, lw)| (u.dot(x), *lw))
            .collect()
    }

    fn max_log_w(&self) -> f64 {
        self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Vol(B) · mean(f(x) 1{pred(x)})` with its standard error.
    pub fn mass_where<P: Fn(&[f64]) -> bool>(&self, pred: P) -> MassEstimate {
        let n = self.len();
        let m = self.max_log_w();
        if n == 0 || !m.is_finite() {
            return MassEstimate {
                mass: 0.0,
                std_err: 0.0,
                samples: n,
            };
        }
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, (x, lw)) in self.points.chunks_exact(self.d).zip(&self.log_w).enumerate() {
            let v = if pred(x) { (lw - m).exp() } else { 0.0 };
            let delta = v - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (v - mean);
        }
        let scale = (m + self.log_vol).exp();
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        MassEstimate {
            mass: scale * mean,
            std_err: scale * (var / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn total_mass(&self) -> MassEstimate {
        self.mass_where(|_| true)
    }

    pub fn halfspace_mass(&self, u: &Context, threshold: f64, side: Side) -> MassEstimate {
        match side {
            Side::Le => self.mass_where(|x| u.dot(x) <= threshold),
            Side::Ge => self.mass_where(|x| u.dot(x) >= threshold),
        }
    }

    /// Self-normalized centroid with delta-method standard errors.
    pub fn centroid(&self, delta: f64) -> CentroidEstimate {
        let d = self.d;
        let m = self.max_log_w();
        let mut sum_w = 0.0;
        let mut acc = vec![0.0; d];
        for (x, lw) in self.points.chunks_exact(d).zip(&self.log_w) {
            let w = (lw - m).exp();
            sum_w += w;
            for (a, xi) in acc.iter_mut().zip(x) {
                *a += w * xi;
            }
        }
        let mut point: Vec<f64> = acc.iter().map(|a| a / sum_w).collect();
        let mut var = vec![0.0; d];
        for (x, lw) in self.points.chunks_exact(d).zip(&self.log_w) {
            let w = (lw - m).exp();
            for ((v, xi), mu) in var.iter_mut().zip(x).zip(&point) {
                let r = w * (xi - mu);
                *v += r * r;
            }
        }
        let std_err: Vec<f64> = var.iter().map(|v| v.sqrt() / sum_w).collect();
        let target_met = std_err.iter().all(|s| *s <= delta / 3.0);
        let clamped = clamp_to_open_ball(&mut point);
        CentroidEstimate {
            point,
            std_err,
            samples: self.len(),
            target_met,
            clamped,
        }
    }
}
