//! Online learners as query/update state machines.
//!
//! Each round the learner answers [`Learner::query`] for a context and then
//! receives only the feedback sign through [`Learner::update`]. Nothing in
//! this interface carries the corruption level or its totals.

use serde::{Deserialize, Serialize};

use crate::density::{DensityState, EstimatorConfig, Factor, WeightedCloud};
use crate::error::{check_dim, param_err, Error, Result};
use crate::median::{window_median, MedianResult, WeightedLine};
use crate::model::{norm, Context, Sign};
use crate::oracle::{Exact1dDensity, FactorModel, NodeRule};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    /// Queries the ε-window median; slab update `3/2, 1, 1/2`.
    EpsWindowMedian { eps: f64, tol: f64 },
    /// Queries the centroid's projection; update `1 + σ<u, x − cg>/3`.
    LogConcaveCentroid { delta: f64 },
    /// Queries the median; slab update with `ε = 0`.
    PlainMedian { tol: f64 },
    /// Projected online gradient descent on `B(0, 1)`.
    Ogd { eta: f64 },
}

impl LearnerKind {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param_err(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            LearnerKind::EpsWindowMedian { eps, tol } => {
                positive("ε", eps)?;
                positive("tol", tol)?;
                if eps >= 1.0 || tol >= 1.0 {
                    return Err(param_err("ε and tol must be below 1"));
                }
                Ok(())
            }
            LearnerKind::LogConcaveCentroid { delta } => positive("δ", delta),
            LearnerKind::PlainMedian { tol } => {
                positive("tol", tol)?;
                if tol >= 1.0 {
                    return Err(param_err("tol must be below 1"));
                }
                Ok(())
            }
            LearnerKind::Ogd { eta } => positive("η", eta),
        }
    }

    /// How feedback becomes a density factor; `None` for OGD.
    pub fn factor_model(&self) -> Option<FactorModel> {
        match *self {
            LearnerKind::EpsWindowMedian { eps, .. } => Some(FactorModel::Slab { eps }),
            LearnerKind::PlainMedian { .. } => Some(FactorModel::Slab { eps: 0.0 }),
            LearnerKind::LogConcaveCentroid { .. } => Some(FactorModel::Linear),
            LearnerKind::Ogd { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::EpsWindowMedian { .. } => "eps_window_median",
            LearnerKind::LogConcaveCentroid { .. } => "log_concave_centroid",
            LearnerKind::PlainMedian { .. } => "plain_median",
            LearnerKind::Ogd { .. } => "ogd",
        }
    }
}

/// How density learners integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact when `d = 1`, Monte Carlo otherwise.
    #[default]
    Auto,
    /// Exact one-dimensional integration; only valid for `d = 1`.
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LearnerOptions {
    pub backend: Backend,
    pub estimator: EstimatorConfig,
}

/// What a query returned, with the estimator diagnostics behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub y: f64,
    /// The centroid the log-concave learner will use in its update.
    pub centroid: Option<Vec<f64>>,
    /// `|ψ(y) − 1|` for medians, the largest coordinate standard error for centroids.
    pub est_error: f64,
    pub median: Option<MedianResult>,
    /// The estimator missed its target (non-bracketing ψ or centroid error above δ/3).
    pub flagged: bool,
}

#[derive(Debug, Clone)]
enum Engine {
    ExactSlab(Exact1dDensity),
    ExactLinear(NodeRule),
    Cloud(Box<WeightedCloud>),
    Ogd(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Pending {
    u: Context,
    y: f64,
    cg: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Learner {
    kind: LearnerKind,
    d: usize,
    engine: Engine,
    /// Factor history for the exact engines; the cloud keeps its own.
    state: Option<DensityState>,
    pending: Option<Pending>,
    rounds: usize,
}

impl Learner {
    pub fn new(kind: LearnerKind, d: usize, opts: LearnerOptions) -> Result<Self> {
        if d == 0 {
            return Err(param_err("dimension must be positive"));
        }
        kind.validate()?;
        let exact = match opts.backend {
            Backend::Auto => d == 1,
            Backend::Exact if d == 1 => true,
            Backend::Exact => return Err(param_err(format!("the exact backend needs d = 1, got d = {d}"))),
            Backend::MonteCarlo => false,
        };
        let (engine, state) = match (kind, exact) {
            (LearnerKind::Ogd { .. }, _) => (Engine::Ogd(vec![0.0; d]), None),
            (LearnerKind::LogConcaveCentroid { .. }, true) => (
                Engine::ExactLinear(NodeRule::new(-1.0, 1.0, -std::f64::consts::LN_2)),
                Some(DensityState::uniform(1)?),
            ),
            (_, true) => (Engine::ExactSlab(Exact1dDensity::uniform()), Some(DensityState::uniform(1)?)),
            (_, false) => (
                Engine::Cloud(Box::new(WeightedCloud::new(DensityState::uniform(d)?, opts.estimator)?)),
                None,
            ),
        };
        Ok(Self {
            kind,
            d,
            engine,
            state,
            pending: None,
            rounds: 0,
        })
    }

    /// Default options with the estimator stream derived from `seed`.
    pub fn init(kind: LearnerKind, d: usize, seed: u64) -> Result<Self> {
        let estimator = EstimatorConfig::default().with_seed(rng::derive_seed(seed, rng::TAG_ESTIMATOR));
        Self::new(
            kind,
            d,
            LearnerOptions {
                backend: Backend::Auto,
                estimator,
            },
        )
    }

    pub fn kind(&self) -> &LearnerKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Completed updates.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.engine, Engine::ExactSlab(_) | Engine::ExactLinear(_))
    }

    pub fn density(&self) -> Option<&DensityState> {
        match &self.engine {
            Engine::Cloud(c) => Some(c.state()),
            _ => self.state.as_ref(),
        }
    }

    pub fn theta(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::Ogd(t) => Some(t),
            _ => None,
        }
    }

    pub fn query(&mut self, u: &Context) -> Result<Query> {
        check_dim(self.d, u.dim())?;
        let q = match (&mut self.engine, self.kind) {
            (Engine::Ogd(theta), _) => Query {
                y: u.dot(theta),
                centroid: None,
                est_error: 0.0,
                median: None,
                flagged: false,
            },
            (Engine::ExactLinear(rule), _) => {
                let mut cg = vec![rule.mean()];
                crate::density::clamp_to_open_ball(&mut cg);
                Query {
                    y: u.dot(&cg),
                    centroid: Some(cg),
                    est_error: 0.0,
                    median: None,
                    flagged: false,
                }
            }
            (Engine::Cloud(cloud), LearnerKind::LogConcaveCentroid { delta }) => {
                let c = cloud.centroid(delta)?;
                Query {
                    y: u.dot(&c.point),
                    est_error: c.max_std_err(),
                    flagged: !c.target_met,
                    centroid: Some(c.point),
                    median: None,
                }
            }
            (engine, kind) => {
                let (eps, tol) = match kind {
                    LearnerKind::EpsWindowMedian { eps, tol } => (eps, tol),
                    LearnerKind::PlainMedian { tol } => (0.0, tol),
                    _ => unreachable!("remaining engines serve slab learners"),
                };
                let r = match engine {
                    Engine::ExactSlab(dens) => dens.window_median(u, eps)?,
                    Engine::Cloud(cloud) => window_median(&WeightedLine::from_samples(cloud.samples(), u)?, eps, tol)?,
                    _ => unreachable!("linear and OGD engines handled above"),
                };
                Query {
                    y: r.y,
                    centroid: None,
                    est_error: r.achieved_tol,
                    median: Some(r),
                    flagged: r.flagged,
                }
            }
        };
        let y = q.y.clamp(-1.0, 1.0);
        self.pending = Some(Pending {
            u: u.clone(),
            y,
            cg: q.centroid.clone(),
        });
        Ok(Query { y, ..q })
    }

    /// Applies the feedback for the immediately preceding query.
    pub fn update(&mut self, u: &Context, y: f64, sigma: Sign) -> Result<()> {
        check_dim(self.d, u.dim())?;
        let pending = match self.pending.take() {
            Some(p) if p.u == *u && p.y.to_bits() == y.to_bits() => p,
            Some(p) => {
                self.pending = Some(p);
                return Err(Error::Usage("update must use the context and answer of the preceding query".into()));
            }
            None => return Err(Error::Usage("update called without a preceding query".into())),
        };
        let factor = match self.kind {
            LearnerKind::Ogd { eta } => {
                let Engine::Ogd(theta) = &mut self.engine else {
                    unreachable!("OGD learners own an OGD engine")
                };
                for (t, ui) in theta.iter_mut().zip(u.as_slice()) {
                    *t += eta * sigma.value() * ui;
                }
                let n = norm(theta);
                if n > 1.0 {
                    theta.iter_mut().for_each(|t| *t /= n);
                }
                None
            }
            LearnerKind::EpsWindowMedian { eps, .. } => Some(Factor::Slab {
                u: u.clone(),
                y,
                sigma,
                eps,
            }),
            LearnerKind::PlainMedian { .. } => Some(Factor::Slab {
                u: u.clone(),
                y,
                sigma,
                eps: 0.0,
            }),
            LearnerKind::LogConcaveCentroid { .. } => Some(Factor::Linear {
                u: u.clone(),
                cg: pending.cg.expect("centroid queries cache their centroid"),
                sigma,
            }),
        };
        if let Some(f) = factor {
            match &mut self.engine {
                Engine::Cloud(cloud) => cloud.push(f)?,
                Engine::ExactSlab(dens) => {
                    dens.push(&f)?;
                    self.push_state(f)?;
                }
                Engine::ExactLinear(rule) => {
                    let Factor::Linear { u, cg, sigma } = &f else {
                        unreachable!("the centroid learner emits linear factors")
                    };
                    let s = u.as_slice()[0] * sigma.value();
                    rule.push(1.0 - s * cg[0] / 3.0, s / 3.0);
                    self.push_state(f)?;
                }
                Engine::Ogd(_) => unreachable!("OGD has no factors"),
            }
        }
        self.rounds += 1;
        Ok(())
    }

    fn push_state(&mut self, f: Factor) -> Result<()> {
        let state = self.state.take().expect("exact engines keep a factor history");
        self.state = Some(state.push(f)?);
        Ok(())
    }
}
