use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::env::{feedback, sample_theta, Environment};
use crate::error::Result;
use crate::learner::{Learner, LearnerKind, LearnerOptions};
use crate::model::{LossKind, RoundRecord};
use crate::oracle::{audit, initial_potential, potential_radius, regret_certificate, FactorModel, OracleReport};
use crate::rng;

/// Per-run totals, all recomputable from the round records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub seed: u64,
    pub learner: String,
    pub loss: String,
    pub policy: String,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Σ ℓ(yₜ, y⋆ₜ) against the corrupted targets.
    pub regret_corrupt: f64,
    /// Σ ℓ(yₜ, <uₜ, θ*>) against the clean targets.
    pub regret_clean: f64,
    pub c0: usize,
    pub c1: f64,
    /// Uncorrupted rounds with clean ε-ball loss 1 (0 for the absolute loss).
    pub clean_loss1_uncorrupted: usize,
    /// `d·ln(1/ε)` for the ε-ball loss, `d·ln T` for the absolute loss.
    pub d_log_scale: f64,
    /// Closed-form regret bound when the learner matches the loss, else empty.
    pub regret_bound: Option<f64>,
    pub bound_holds: Option<bool>,
    pub certificate_bound: Option<f64>,
    pub certificate_observed: Option<f64>,
    pub certificate_holds: Option<bool>,
    pub violations: Option<usize>,
    pub oracle_passed: Option<bool>,
    #[serde(with = "crate::model::lossless_float")]
    pub max_est_error: f64,
    pub flagged_queries: usize,
}

impl RunSummary {
    /// Rebuilds the summary from records, optional oracle output and the flagged count.
    pub fn compute(
        run_id: &str,
        seed: u64,
        cfg: &ExperimentConfig,
        rounds: &[RoundRecord],
        oracle: Option<&OracleReport>,
        flagged_queries: usize,
    ) -> Result<Self> {
        let regret_corrupt = rounds.iter().map(|r| r.loss_corrupt).sum();
        let regret_clean = rounds.iter().map(|r| r.loss_clean).sum();
        let c0 = rounds.iter().filter(|r| r.z != 0.0).count();
        let c1: f64 = rounds.iter().map(|r| r.z.abs()).sum();
        let (loss, d_log_scale, clean_loss1_uncorrupted) = match cfg.loss {
            LossKind::EpsBall { .. } => (
                "eps_ball",
                cfg.d as f64 * (1.0 / loss_eps(&cfg.loss)).ln(),
                rounds.iter().filter(|r| r.z == 0.0 && r.loss_clean >= 1.0).count(),
            ),
            LossKind::Absolute => ("absolute", cfg.d as f64 * (cfg.horizon as f64).ln(), 0),
        };
        let regret_bound = regret_bound(cfg, c0, c1)?;
        Ok(Self {
            run_id: run_id.to_string(),
            seed,
            learner: cfg.learner.name().to_string(),
            loss: loss.to_string(),
            policy: cfg.corruption.name().to_string(),
            d: cfg.d,
            horizon: cfg.horizon,
            regret_corrupt,
            regret_clean,
            c0,
            c1,
            clean_loss1_uncorrupted,
            d_log_scale,
            regret_bound,
            bound_holds: regret_bound.map(|b| regret_corrupt <= b),
            certificate_bound: oracle.map(|o| o.certificate.bound),
            certificate_observed: oracle.map(|o| o.certificate.observed),
            certificate_holds: oracle.map(|o| o.certificate.holds),
            violations: oracle.map(|o| o.transitions.violations.len()),
            oracle_passed: oracle.map(|o| o.passed()),
            max_est_error: rounds.iter().map(|r| r.est_error).fold(0.0, f64::max),
            flagged_queries,
        })
    }

    /// False when a computed bound or an oracle check failed.
    pub fn passed(&self) -> bool {
        self.bound_holds != Some(false) && self.oracle_passed != Some(false)
    }
}

fn loss_eps(loss: &LossKind) -> f64 {
    match loss {
        LossKind::EpsBall { eps } => *eps,
        LossKind::Absolute => 0.0,
    }
}

/// The factor model the oracle should replay, when the learner and loss pair up.
pub(crate) fn oracle_model(learner: &LearnerKind, loss: &LossKind) -> Option<FactorModel> {
    match (learner, loss) {
        (LearnerKind::EpsWindowMedian { eps, .. }, LossKind::EpsBall { eps: le }) if eps == le => {
            Some(FactorModel::Slab { eps: *eps })
        }
        (LearnerKind::LogConcaveCentroid { .. }, LossKind::Absolute) => Some(FactorModel::Linear),
        _ => None,
    }
}

/// Total corrupted regret bound from the telescoped potential argument.
///
/// ε-ball: `C₀ + (C₀ ln 2 − ln Φ₁)/ln(3/2)`.
/// Absolute: `1 + 2C₁ + (3/ln 2)(−ln Φ₁ + ln 3 + 2 + (α/3)C₁)`.
pub fn regret_bound(cfg: &ExperimentConfig, c0: usize, c1: f64) -> Result<Option<f64>> {
    if oracle_model(&cfg.learner, &cfg.loss).is_none() {
        return Ok(None);
    }
    let phi1 = initial_potential(cfg.d, potential_radius(&cfg.loss, cfg.horizon));
    Ok(Some(match cfg.loss {
        LossKind::EpsBall { .. } => c0 as f64 + regret_certificate(&cfg.loss, c0 as f64, phi1)?,
        LossKind::Absolute => 1.0 + 2.0 * c1 + regret_certificate(&cfg.loss, c1, phi1)?,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub theta_star: Vec<f64>,
    pub rounds: Vec<RoundRecord>,
    pub summary: RunSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    pub wall_time_ms: f64,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.summary.passed()
    }
}

pub fn run_id(cfg: &ExperimentConfig, seed: u64) -> String {
    format!(
        "{}_{}_d{}_T{}_s{}",
        cfg.learner.name(),
        cfg.corruption.name(),
        cfg.d,
        cfg.horizon,
        seed
    )
}

/// Runs one seed of an experiment.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    let theta = sample_theta(cfg.d, cfg.margin, rng::derive_seed(seed, rng::TAG_THETA))?;
    let mut env = Environment::new(theta.clone(), cfg.contexts, cfg.corruption, cfg.horizon, seed)?;
    let opts = LearnerOptions {
        backend: cfg.backend,
        estimator: cfg.estimator.with_seed(rng::derive_seed(seed, rng::TAG_ESTIMATOR)),
    };
    let mut learner = Learner::new(cfg.learner, cfg.d, opts)?;
    let mut rounds = Vec::with_capacity(cfg.horizon);
    let mut flagged = 0;
    for t in 1..=cfg.horizon {
        let u = env.next_context(t)?;
        let q = learner.query(&u)?;
        let y = q.y;
        let clean = u.dot(&theta);
        let z = env.corrupt(t, clean, y);
        let sigma = feedback(&theta, &u, z, y);
        learner.update(&u, y, sigma)?;
        flagged += usize::from(q.flagged);
        rounds.push(RoundRecord {
            t,
            u,
            z,
            y,
            sigma,
            y_star_clean: clean,
            y_star_corrupt: clean + z,
            loss_clean: cfg.loss.loss(y, clean),
            loss_corrupt: cfg.loss.loss(y, clean + z),
            centroid: q.centroid,
            est_error: q.est_error,
        });
    }
    let oracle = if cfg.oracle_checks {
        let model = oracle_model(&cfg.learner, &cfg.loss)
            .ok_or_else(|| crate::Error::Config("oracle_checks needs a matching learner and loss".into()))?;
        Some(audit(
            &rounds,
            &theta,
            &cfg.loss,
            model,
            cfg.estimator.sample_count,
            rng::derive_seed(seed, rng::TAG_POTENTIAL),
        )?)
    } else {
        None
    };
    let id = run_id(cfg, seed);
    let summary = RunSummary::compute(&id, seed, cfg, &rounds, oracle.as_ref(), flagged)?;
    Ok(RunReport {
        run_id: id,
        seed,
        config: cfg.clone(),
        theta_star: theta,
        rounds,
        summary,
        oracle,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every seed of the config in parallel, in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunReport>> {
    cfg.seeds.par_iter().map(|&s| run_single(cfg, s)).collect()
}

/// Re-audits a stored report: totals must match the rounds, and paired runs
/// must pass the oracle checks again.
pub fn verify_report(report: &RunReport) -> Result<RunSummary> {
    let cfg = &report.config;
    let oracle = match oracle_model(&cfg.learner, &cfg.loss) {
        Some(model) if cfg.d <= 2 => Some(audit(
            &report.rounds,
            &report.theta_star,
            &cfg.loss,
            model,
            cfg.estimator.sample_count,
            rng::derive_seed(report.seed, rng::TAG_POTENTIAL),
        )?),
        _ => None,
    };
    RunSummary::compute(
        &report.run_id,
        report.seed,
        cfg,
        &report.rounds,
        oracle.as_ref(),
        report.summary.flagged_queries,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ConfigFile;

    fn cfg(extra: &str) -> ExperimentConfig {
        ConfigFile::from_json(&format!(
            r#"{{"d": 1, "T": 100, "learner.kind": "eps_window_median", "loss.kind": "eps_ball",
                "loss.eps": 0.05, "seeds": [3] {extra}}}"#
        ))
        .unwrap()
        .resolve()
        .unwrap()
    }

    #[test]
    fn uncorrupted_eps_ball_run() {
        let c = cfg(r#", "oracle_checks": true"#);
        let r = run_single(&c, 3).unwrap();
        assert_eq!(r.rounds.len(), 100);
        assert_eq!(r.summary.c0, 0);
        assert!(r.summary.regret_corrupt <= 9.0);
        assert!(r.summary.certificate_holds.unwrap());
        assert_eq!(r.summary.violations, Some(0));
        assert!(r.passed());
        for (i, rec) in r.rounds.iter().enumerate() {
            assert_eq!(rec.t, i + 1);
            assert_eq!(rec.y_star_clean, rec.y_star_corrupt);
        }
    }

    #[test]
    fn drip_totals() {
        let c = cfg(r#", "corruption.policy": "drip_magnitude""#);
        let r = run_single(&c, 3).unwrap();
        assert_eq!(r.summary.c0, 100);
        assert!((r.summary.c1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let c = cfg(r#", "corruption.policy": "targeted_flip", "corruption.param": 5, "oracle_checks": true"#);
        let a = run_single(&c, 11).unwrap();
        let b = run_single(&c, 11).unwrap();
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.oracle, b.oracle);
    }

    #[test]
    fn verify_matches_stored_summary() {
        let c = cfg(r#", "corruption.policy": "first_rounds", "corruption.param": 4, "oracle_checks": true"#);
        let r = run_single(&c, 5).unwrap();
        assert_eq!(verify_report(&r).unwrap(), r.summary);
    }

    #[test]
    fn bounds_only_for_matching_pairs() {
        let mut c = cfg("");
        c.learner = LearnerKind::Ogd { eta: 0.1 };
        assert_eq!(regret_bound(&c, 0, 0.0).unwrap(), None);
        let c = cfg("");
        let b = regret_bound(&c, 2, 0.0).unwrap().unwrap();
        let want = 2.0 + (2.0 * 2f64.ln() - 0.025f64.ln()) / 1.5f64.ln();
        assert!((b - want).abs() < 1e-12);
    }
}
