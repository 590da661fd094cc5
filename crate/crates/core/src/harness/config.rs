use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::EstimatorConfig;
use crate::env::{ContextStrategy, CorruptionPolicy};
use crate::error::{Error, Result};
use crate::learner::{Backend, LearnerKind};
use crate::median::DEFAULT_TOL;
use crate::model::LossKind;
use crate::oracle::FactorModel;

pub const DEFAULT_SAMPLES: usize = 50_000;
const DEFAULT_NOISE: f64 = 0.1;

/// The flat configuration document, one dotted key per setting.
///
/// ```json
/// { "d": 1, "T": 2000, "learner.kind": "eps_window_median", "loss.kind": "eps_ball",
///   "loss.eps": 0.05, "corruption.policy": "first_rounds", "corruption.param": 10,
///   "seeds": [1, 2, 3], "oracle_checks": true }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "learner.kind")]
    pub learner_kind: String,
    #[serde(rename = "learner.eps", default, skip_serializing_if = "Option::is_none")]
    pub learner_eps: Option<f64>,
    #[serde(rename = "learner.delta", default, skip_serializing_if = "Option::is_none")]
    pub learner_delta: Option<f64>,
    #[serde(rename = "learner.eta", default, skip_serializing_if = "Option::is_none")]
    pub learner_eta: Option<f64>,
    #[serde(rename = "learner.tol", default, skip_serializing_if = "Option::is_none")]
    pub learner_tol: Option<f64>,
    #[serde(rename = "learner.backend", default, skip_serializing_if = "Option::is_none")]
    pub learner_backend: Option<Backend>,
    #[serde(rename = "loss.kind")]
    pub loss_kind: String,
    #[serde(rename = "loss.eps", default, skip_serializing_if = "Option::is_none")]
    pub loss_eps: Option<f64>,
    #[serde(rename = "context.strategy", default, skip_serializing_if = "Option::is_none")]
    pub context_strategy: Option<String>,
    #[serde(rename = "context.noise", default, skip_serializing_if = "Option::is_none")]
    pub context_noise: Option<f64>,
    #[serde(rename = "corruption.policy", default, skip_serializing_if = "Option::is_none")]
    pub corruption_policy: Option<String>,
    #[serde(rename = "corruption.param", default, skip_serializing_if = "Option::is_none")]
    pub corruption_param: Option<f64>,
    pub seeds: Vec<u64>,
    #[serde(rename = "estimator.samples", default, skip_serializing_if = "Option::is_none")]
    pub estimator_samples: Option<usize>,
    #[serde(rename = "estimator.max_samples", default, skip_serializing_if = "Option::is_none")]
    pub estimator_max_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default)]
    pub oracle_checks: bool,
}

/// Keys a sweep may vary, plus the aliases `eps` (both ε keys) and `C` (`corruption.param`).
pub const SWEEP_AXES: &[&str] = &[
    "d",
    "T",
    "learner.eps",
    "learner.delta",
    "learner.eta",
    "learner.tol",
    "loss.eps",
    "context.noise",
    "corruption.param",
    "estimator.samples",
    "estimator.max_samples",
    "margin",
    "eps",
    "C",
];

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// A copy with one numeric key replaced.
    pub fn with_value(&self, axis: &str, value: f64) -> Result<Self> {
        if !SWEEP_AXES.contains(&axis) {
            return Err(Error::Config(format!(
                "unknown sweep axis '{axis}'; expected one of {}",
                SWEEP_AXES.join(", ")
            )));
        }
        let mut map = match serde_json::to_value(self)? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("configs serialize to objects"),
        };
        let json = if value.fract() == 0.0 && value.abs() < 9.0e15 {
            serde_json::Value::from(value as i64)
        } else {
            serde_json::Value::from(value)
        };
        let keys: Vec<&str> = match axis {
            "eps" => {
                let mut k = vec!["loss.eps"];
                if self.learner_eps.is_some() {
                    k.push("learner.eps");
                }
                k
            }
            "C" => vec!["corruption.param"],
            other => vec![other],
        };
        for k in keys {
            map.insert(k.to_string(), json.clone());
        }
        serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| Error::Config(format!("{axis} = {value}: {e}")))
    }

    /// Fills defaults and checks every invariant.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let cfg = |m: String| Error::Config(m);
        let t = self.horizon;
        if self.d == 0 {
            return Err(cfg("d must be at least 1".into()));
        }
        if t == 0 {
            return Err(cfg("T must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(cfg("seeds must list at least one seed".into()));
        }
        let loss = match self.loss_kind.as_str() {
            "eps_ball" => {
                let eps = self.loss_eps.ok_or_else(|| cfg("loss.kind = eps_ball needs loss.eps".into()))?;
                LossKind::eps_ball(eps)?
            }
            "absolute" => {
                if self.loss_eps.is_some() {
                    return Err(cfg("loss.eps has no meaning for the absolute loss".into()));
                }
                LossKind::Absolute
            }
            other => return Err(cfg(format!("unknown loss.kind '{other}' (eps_ball | absolute)"))),
        };
        let tol = self.learner_tol.unwrap_or(DEFAULT_TOL);
        let learner = match self.learner_kind.as_str() {
            "eps_window_median" => {
                let eps = match (self.learner_eps, loss) {
                    (Some(e), _) => e,
                    (None, LossKind::EpsBall { eps }) => eps,
                    (None, LossKind::Absolute) => {
                        return Err(cfg("eps_window_median with the absolute loss needs learner.eps".into()))
                    }
                };
                LearnerKind::EpsWindowMedian { eps, tol }
            }
            "log_concave_centroid" => LearnerKind::LogConcaveCentroid {
                delta: self.learner_delta.unwrap_or(1.0 / t as f64),
            },
            "plain_median" => LearnerKind::PlainMedian { tol },
            "ogd" => LearnerKind::Ogd {
                eta: self.learner_eta.unwrap_or(1.0 / (t as f64).sqrt()),
            },
            other => {
                return Err(cfg(format!(
                    "unknown learner.kind '{other}' (eps_window_median | log_concave_centroid | plain_median | ogd)"
                )))
            }
        };
        learner.validate()?;
        let contexts = match self.context_strategy.as_deref().unwrap_or("uniform_sphere") {
            "uniform_sphere" => ContextStrategy::UniformSphere,
            "axis_cycle" => ContextStrategy::AxisCycle,
            "adversarial_toward_target" => ContextStrategy::AdversarialTowardTarget {
                noise: self.context_noise.unwrap_or(DEFAULT_NOISE),
            },
            other => {
                return Err(cfg(format!(
                    "unknown context.strategy '{other}' (uniform_sphere | axis_cycle | adversarial_toward_target)"
                )))
            }
        };
        if self.context_noise.is_some() && !matches!(contexts, ContextStrategy::AdversarialTowardTarget { .. }) {
            return Err(cfg("context.noise only applies to adversarial_toward_target".into()));
        }
        let count = |name: &str| -> Result<usize> {
            let p = self
                .corruption_param
                .ok_or_else(|| cfg(format!("corruption.policy = {name} needs corruption.param")))?;
            if p >= 0.0 && p.fract() == 0.0 {
                Ok(p as usize)
            } else {
                Err(cfg(format!("corruption.param for {name} must be a nonnegative integer, got {p}")))
            }
        };
        let corruption = match self.corruption_policy.as_deref().unwrap_or("none") {
            "none" => {
                if self.corruption_param.is_some() {
                    return Err(cfg("corruption.param has no meaning for policy none".into()));
                }
                CorruptionPolicy::None
            }
            "first_rounds" => CorruptionPolicy::FirstRounds {
                count: count("first_rounds")?,
            },
            "random_flip_budget" => CorruptionPolicy::RandomFlipBudget {
                count: count("random_flip_budget")?,
            },
            "targeted_flip" => CorruptionPolicy::TargetedFlip {
                budget: count("targeted_flip")?,
            },
            "drip_magnitude" => CorruptionPolicy::DripMagnitude {
                magnitude: self.corruption_param.unwrap_or(1.0 / t as f64),
            },
            other => {
                return Err(cfg(format!(
                    "unknown corruption.policy '{other}' (none | first_rounds | random_flip_budget | drip_magnitude | targeted_flip)"
                )))
            }
        };
        corruption.validate()?;
        let samples = self.estimator_samples.unwrap_or(DEFAULT_SAMPLES);
        let estimator = EstimatorConfig::new(samples, 0).with_max_samples(self.estimator_max_samples.unwrap_or(samples));
        estimator.validate()?;
        let backend = self.learner_backend.unwrap_or_default();
        if backend == Backend::Exact && self.d != 1 {
            return Err(cfg("learner.backend = exact needs d = 1".into()));
        }
        let radius = crate::oracle::potential_radius(&loss, t);
        let margin = self.margin.unwrap_or(radius);
        if !(0.0..1.0).contains(&margin) {
            return Err(cfg(format!("margin must lie in [0, 1), got {margin}")));
        }
        if self.oracle_checks {
            if self.d > 2 {
                return Err(cfg("oracle_checks needs d ≤ 2".into()));
            }
            match (learner.factor_model(), loss) {
                (Some(FactorModel::Slab { eps }), LossKind::EpsBall { eps: le })
                    if matches!(learner, LearnerKind::EpsWindowMedian { .. }) =>
                {
                    if eps != le {
                        return Err(cfg(format!("oracle_checks needs learner.eps ({eps}) = loss.eps ({le})")));
                    }
                }
                (Some(FactorModel::Linear), LossKind::Absolute) => {}
                _ => {
                    return Err(cfg(
                        "oracle_checks pairs eps_window_median with eps_ball or log_concave_centroid with absolute".into(),
                    ))
                }
            }
            if margin < radius {
                return Err(cfg(format!("oracle_checks needs margin ≥ {radius} so the potential ball fits")));
            }
        }
        Ok(ExperimentConfig {
            d: self.d,
            horizon: t,
            learner,
            backend,
            loss,
            contexts,
            corruption,
            seeds: self.seeds.clone(),
            estimator,
            margin,
            oracle_checks: self.oracle_checks,
        })
    }
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub learner: LearnerKind,
    pub backend: Backend,
    pub loss: LossKind,
    pub contexts: ContextStrategy,
    pub corruption: CorruptionPolicy,
    pub seeds: Vec<u64>,
    pub estimator: EstimatorConfig,
    pub margin: f64,
    pub oracle_checks: bool,
}
