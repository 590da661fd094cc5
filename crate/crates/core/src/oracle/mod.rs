//! Ground truth for checking learners: exact one-dimensional densities,
//! potentials around the target, per-round case labels, transition checks and
//! regret certificates.
//!
//! The oracle sees `θ*` and the corruption trace; learners never do.

mod exact1d;
mod quadrature;

use serde::{Deserialize, Serialize};

pub use exact1d::{Exact1dDensity, ExactLine};
pub use quadrature::{gauss_legendre, nodes_for, NodeRule};

use crate::density::{BallSampler, DensityState, Factor, FactorKind};
use crate::error::{param_err, Error, Result};
use crate::model::{norm, Context, LossKind, RoundRecord, Sign};

/// `α = (3/2) ln 3`, the constant with `1 − v ≥ e^{−αv}` on `[0, 2/3]`.
pub const ALPHA: f64 = 1.5 * 1.098_612_288_668_109_8;

const REL_TOL: f64 = 1e-9;

/// Mass of the current density inside `B(θ*, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub value: f64,
    /// Zero when computed exactly.
    pub std_err: f64,
}

/// `Φ₁ = Vol(B(θ*, r)) / Vol(B(0, 1)) = r^d` for the uniform start.
pub fn initial_potential(d: usize, radius: f64) -> f64 {
    radius.powi(d as i32)
}

fn check_ball(theta_star: &[f64], radius: f64) -> Result<()> {
    if !(radius > 0.0) {
        return Err(param_err(format!("potential radius must be positive, got {radius}")));
    }
    let n = norm(theta_star);
    if n + radius > 1.0 + 1e-12 {
        return Err(param_err(format!(
            "B(θ*, {radius}) leaves the unit ball (‖θ*‖ = {n}); sample θ* with a larger margin"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Tracker {
    Exact {
        center: f64,
        dens: Exact1dDensity,
        rule: NodeRule,
    },
    MonteCarlo {
        d: usize,
        points: Vec<f64>,
        log_w: Vec<f64>,
    },
}

/// Incrementally updated potential `Φₜ`.
///
/// Exact in one dimension. In higher dimensions a fixed set of uniform points
/// inside `B(θ*, r)` is reweighted, so consecutive values share random numbers.
#[derive(Debug, Clone)]
pub struct PotentialTracker {
    radius: f64,
    tracker: Tracker,
}

impl PotentialTracker {
    pub fn new(theta_star: &[f64], radius: f64, samples: usize, seed: u64) -> Result<Self> {
        check_ball(theta_star, radius)?;
        let d = theta_star.len();
        if d == 0 {
            return Err(param_err("dimension must be positive"));
        }
        let tracker = if d == 1 {
            let c = theta_star[0];
            Tracker::Exact {
                center: c,
                dens: Exact1dDensity::uniform(),
                rule: NodeRule::new(c - radius, c + radius, -std::f64::consts::LN_2),
            }
        } else {
            if samples == 0 {
                return Err(param_err("potential needs at least one sample"));
            }
            let mut points = Vec::with_capacity(samples * d);
            BallSampler::new(d, seed).extend(&mut points, samples);
            for p in points.chunks_exact_mut(d) {
                for (x, c) in p.iter_mut().zip(theta_star) {
                    *x = c + radius * *x;
                }
            }
            Tracker::MonteCarlo {
                d,
                points,
                log_w: vec![0.0; samples],
            }
        };
        Ok(Self { radius, tracker })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.tracker, Tracker::Exact { .. })
    }

    pub fn push(&mut self, factor: &Factor) -> Result<()> {
        match &mut self.tracker {
            Tracker::Exact { dens, rule, .. } => {
                dens.push(factor)?;
                if let Factor::Linear { .. } = factor {
                    let &(a, b) = dens.linear_factors().last().expect("just pushed");
                    rule.push(a, b);
                }
            }
            Tracker::MonteCarlo { d, points, log_w } => {
                crate::error::check_dim(*d, factor.context().dim())?;
                let lm = factor.line_multiplier();
                let u = factor.context();
                for (x, lw) in points.chunks_exact(*d).zip(log_w.iter_mut()) {
                    *lw += lm.ln_at(u.dot(x));
                }
            }
        }
        Ok(())
    }

    pub fn current(&self) -> Potential {
        match &self.tracker {
            Tracker::Exact { center, dens, rule } => {
                let value = if dens.kind() == Some(FactorKind::Linear) {
                    rule.mass()
                } else {
                    dens.mass(center - self.radius, center + self.radius)
                };
                Potential { value, std_err: 0.0 }
            }
            Tracker::MonteCarlo { d, log_w, .. } => {
                let n = log_w.len() as f64;
                let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (mut s, mut s2) = (0.0, 0.0);
                for lw in log_w {
                    let v = (lw - m).exp();
                    s += v;
                    s2 += v * v;
                }
                let mean = s / n;
                let var = if n > 1.0 { (s2 - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
                let scale = (m + *d as f64 * self.radius.ln()).exp();
                Potential {
                    value: scale * mean,
                    std_err: scale * (var / n).sqrt(),
                }
            }
        }
    }
}

/// `Φ` for a state from scratch: exact when `d = 1`, Monte Carlo otherwise.
pub fn potential(state: &DensityState, theta_star: &[f64], radius: f64, samples: usize, seed: u64) -> Result<Potential> {
    crate::error::check_dim(state.dim(), theta_star.len())?;
    let mut t = PotentialTracker::new(theta_star, radius, samples, seed)?;
    for f in state.factors() {
        t.push(f)?;
    }
    Ok(t.current())
}

/// Which case of the potential argument a round falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    /// ε-ball: `z ≠ 0`.
    Corrupted,
    /// ε-ball: uncorrupted with clean loss 1.
    CleanLoss1,
    /// ε-ball: uncorrupted with clean loss 0.
    CleanLoss0,
    /// Absolute: `ℓ ≤ 1/T`.
    S1,
    /// Absolute: `ℓ > 1/T`, feedback agrees with the clean sign.
    S2,
    /// Absolute: `ℓ > 1/T`, feedback flipped by the corruption.
    S3,
}

pub fn classify_round(rec: &RoundRecord, loss: &LossKind, horizon: usize) -> CaseLabel {
    let gap = rec.y_star_clean - rec.y;
    match *loss {
        LossKind::EpsBall { eps } => {
            if rec.z != 0.0 {
                CaseLabel::Corrupted
            } else if gap.abs() >= eps {
                CaseLabel::CleanLoss1
            } else {
                CaseLabel::CleanLoss0
            }
        }
        LossKind::Absolute => {
            if gap.abs() <= 1.0 / horizon as f64 {
                CaseLabel::S1
            } else if rec.sigma == Sign::of(gap) {
                CaseLabel::S2
            } else {
                CaseLabel::S3
            }
        }
    }
}

pub fn classify_rounds(records: &[RoundRecord], loss: &LossKind, horizon: usize) -> Vec<CaseLabel> {
    records.iter().map(|r| classify_round(r, loss, horizon)).collect()
}

/// Potentials `Φ₁ … Φ_{T+1}` with the per-round data the transition checks need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTrace {
    pub radius: f64,
    pub exact: bool,
    pub phi: Vec<Potential>,
    pub labels: Vec<CaseLabel>,
    /// `ℓₜ = |yₜ − <uₜ, θ*>|`.
    pub clean_gap: Vec<f64>,
    pub abs_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: usize,
    pub label: CaseLabel,
    pub phi_before: f64,
    pub phi_after: f64,
    /// Required multiple of `phi_before`.
    pub factor: f64,
    pub equality: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl TransitionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every round's potential change against its case.
///
/// Exact potentials get relative tolerance `1e-9`; Monte Carlo potentials
/// additionally get three combined standard errors of slack.
pub fn verify_case_transitions(trace: &PotentialTrace, horizon: usize) -> TransitionReport {
    let inv_t = 1.0 / horizon as f64;
    let mut report = TransitionReport::default();
    for (i, label) in trace.labels.iter().enumerate() {
        let (Some(before), Some(after)) = (trace.phi.get(i), trace.phi.get(i + 1)) else {
            break;
        };
        let (factor, equality) = match label {
            CaseLabel::Corrupted => (0.5, false),
            CaseLabel::CleanLoss1 => (1.5, true),
            CaseLabel::CleanLoss0 => (1.0, false),
            CaseLabel::S1 => (1.0 - 2.0 * inv_t / 3.0, false),
            CaseLabel::S2 => (1.0 + (trace.clean_gap[i] - inv_t) / 3.0, false),
            CaseLabel::S3 => (1.0 - (trace.abs_z[i] + inv_t) / 3.0, false),
        };
        let target = factor * before.value;
        let slack = REL_TOL * target.abs()
            + 3.0 * (after.std_err.powi(2) + (factor * before.std_err).powi(2)).sqrt();
        let ok = if equality {
            (after.value - target).abs() <= slack
        } else {
            after.value >= target - slack
        };
        report.checked += 1;
        if !ok {
            report.violations.push(Violation {
                t: i + 1,
                label: *label,
                phi_before: before.value,
                phi_after: after.value,
                factor,
                equality,
            });
        }
    }
    report
}

/// Bound on the number of uncorrupted loss-1 rounds: `(C₀ ln 2 − ln Φ₁) / ln(3/2)`.
pub fn eps_ball_certificate(c0: usize, phi1: f64) -> Result<f64> {
    if !(phi1 > 0.0) {
        return Err(param_err(format!("Φ₁ must be positive, got {phi1}")));
    }
    Ok((c0 as f64 * std::f64::consts::LN_2 - phi1.ln()) / 1.5f64.ln())
}

/// Bound on `Σ_{S₂} ℓₜ`: `(3/ln 2)(−ln Φ₁ + ln 3 + 2 + (α/3) Σ_{S₃}|zₜ|)`.
pub fn absolute_certificate(s3_abs_z: f64, phi1: f64) -> Result<f64> {
    if !(phi1 > 0.0) {
        return Err(param_err(format!("Φ₁ must be positive, got {phi1}")));
    }
    Ok(3.0 / std::f64::consts::LN_2 * (-phi1.ln() + 3f64.ln() + 2.0 + ALPHA / 3.0 * s3_abs_z))
}

/// `corruption` is `C₀` for the ε-ball loss and `Σ_{S₃}|zₜ|` for the absolute loss.
pub fn regret_certificate(loss: &LossKind, corruption: f64, phi1: f64) -> Result<f64> {
    match loss {
        LossKind::EpsBall { .. } => {
            if !(corruption >= 0.0) || corruption.fract() != 0.0 {
                return Err(param_err(format!("C₀ must be a nonnegative integer, got {corruption}")));
            }
            eps_ball_certificate(corruption as usize, phi1)
        }
        LossKind::Absolute => absolute_certificate(corruption, phi1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub phi1: f64,
    pub bound: f64,
    /// Clean loss-1 count (ε-ball) or `Σ_{S₂} ℓₜ` (absolute).
    pub observed: f64,
    pub holds: bool,
}

/// How the learner turned feedback into factors, needed to replay a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorModel {
    Slab { eps: f64 },
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub trace: PotentialTrace,
    pub transitions: TransitionReport,
    pub certificate: Certificate,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.transitions.is_clean() && self.certificate.holds
    }
}

/// Potential radius for a loss: `ε/2` for the ε-ball loss, `1/T` for the absolute loss.
pub fn potential_radius(loss: &LossKind, horizon: usize) -> f64 {
    match loss {
        LossKind::EpsBall { eps } => eps / 2.0,
        LossKind::Absolute => 1.0 / horizon as f64,
    }
}

/// Rebuilds the learner's density from a recorded trace and runs every check.
pub fn audit(
    records: &[RoundRecord],
    theta_star: &[f64],
    loss: &LossKind,
    model: FactorModel,
    samples: usize,
    seed: u64,
) -> Result<OracleReport> {
    let horizon = records.len().max(1);
    match (model, loss) {
        (FactorModel::Slab { eps }, LossKind::EpsBall { eps: loss_eps }) => {
            if eps != *loss_eps {
                return Err(Error::Config(format!(
                    "case checks need the learner window ({eps}) to equal the loss ε ({loss_eps})"
                )));
            }
        }
        (FactorModel::Linear, LossKind::Absolute) => {}
        _ => {
            return Err(Error::Config(
                "case checks pair slab learners with the ε-ball loss and the centroid learner with the absolute loss".into(),
            ))
        }
    }
    let d = theta_star.len();
    let radius = potential_radius(loss, horizon);
    let mut tracker = PotentialTracker::new(theta_star, radius, samples, seed)?;
    let mut phi = vec![tracker.current()];
    for rec in records {
        let u: &Context = &rec.u;
        crate::error::check_dim(d, u.dim())?;
        let f = match model {
            FactorModel::Slab { eps } => Factor::Slab {
                u: u.clone(),
                y: rec.y,
                sigma: rec.sigma,
                eps,
            },
            FactorModel::Linear => Factor::Linear {
                u: u.clone(),
                cg: rec
                    .centroid
                    .clone()
                    .ok_or_else(|| Error::Config(format!("round {} has no recorded centroid", rec.t)))?,
                sigma: rec.sigma,
            },
        };
        tracker.push(&f)?;
        phi.push(tracker.current());
    }
    let labels = classify_rounds(records, loss, horizon);
    let trace = PotentialTrace {
        radius,
        exact: tracker.is_exact(),
        phi,
        labels,
        clean_gap: records.iter().map(|r| (r.y - r.y_star_clean).abs()).collect(),
        abs_z: records.iter().map(|r| r.z.abs()).collect(),
    };
    let transitions = verify_case_transitions(&trace, horizon);
    let phi1 = initial_potential(d, radius);
    let certificate = match loss {
        LossKind::EpsBall { .. } => {
            let c0 = records.iter().filter(|r| r.z != 0.0).count();
            let observed = trace.labels.iter().filter(|l| **l == CaseLabel::CleanLoss1).count() as f64;
            let bound = eps_ball_certificate(c0, phi1)?;
            Certificate {
                phi1,
                bound,
                observed,
                holds: observed <= bound,
            }
        }
        LossKind::Absolute => {
            let (mut s2, mut s3) = (0.0, 0.0);
            for (i, l) in trace.labels.iter().enumerate() {
                match l {
                    CaseLabel::S2 => s2 += trace.clean_gap[i],
                    CaseLabel::S3 => s3 += trace.abs_z[i],
                    _ => {}
                }
            }
            let bound = absolute_certificate(s3, phi1)?;
            Certificate {
                phi1,
                bound,
                observed: s2,
                holds: s2 <= bound,
            }
        }
    };
    Ok(OracleReport {
        trace,
        transitions,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> Context {
        Context::axis(1, 0).unwrap()
    }

    fn record(t: usize, y: f64, y_star: f64, z: f64) -> RoundRecord {
        RoundRecord {
            t,
            u: e1(),
            z,
            y,
            sigma: Sign::of(y_star + z - y),
            y_star_clean: y_star,
            y_star_corrupt: y_star + z,
            loss_clean: (y - y_star).abs(),
            loss_corrupt: (y - y_star - z).abs(),
            centroid: None,
            est_error: 0.0,
        }
    }

    #[test]
    fn potential_examples() {
        let s = DensityState::uniform(1).unwrap();
        let p = potential(&s, &[0.5], 0.1, 0, 0).unwrap();
        assert!((p.value - 0.1).abs() < 1e-15 && p.std_err == 0.0);

        // loss-1 clean round: target at 0.5, query 0 ⇒ factor exactly 3/2 on the ball
        let s1 = s.clone().apply_slab_update(&e1(), 0.0, Sign::Plus, 0.1).unwrap();
        let p1 = potential(&s1, &[0.5], 0.05, 0, 0).unwrap();
        let p0 = potential(&s, &[0.5], 0.05, 0, 0).unwrap();
        assert!((p1.value / p0.value - 1.5).abs() < 1e-12);

        // corrupted round pushing the wrong way: at least half remains
        let s2 = s.apply_slab_update(&e1(), 0.0, Sign::Minus, 0.1).unwrap();
        let p2 = potential(&s2, &[0.5], 0.05, 0, 0).unwrap();
        assert!(p2.value >= 0.5 * p0.value * (1.0 - 1e-12));

        assert!(potential(&DensityState::uniform(1).unwrap(), &[0.95], 0.1, 0, 0).is_err());
    }

    #[test]
    fn monte_carlo_potential_matches_volume() {
        let s = DensityState::uniform(2).unwrap();
        let p = potential(&s, &[0.2, -0.3], 0.1, 10_000, 1).unwrap();
        // uniform weights: exact with zero variance
        assert!((p.value - 0.01).abs() < 1e-12);
        assert!(p.std_err < 1e-12);
    }

    #[test]
    fn eps_ball_certificate_examples() {
        assert!((eps_ball_certificate(0, 0.005).unwrap() - 13.067).abs() < 1e-3);
        assert!((eps_ball_certificate(0, 0.025).unwrap() - 9.098).abs() < 1e-3);
        let step = eps_ball_certificate(4, 0.01).unwrap() - eps_ball_certificate(3, 0.01).unwrap();
        assert!((step - 2f64.ln() / 1.5f64.ln()).abs() < 1e-12);
        assert!((step - 1.7095).abs() < 1e-4);
        assert!(eps_ball_certificate(0, 0.0).is_err());
        assert!(regret_certificate(&LossKind::Absolute, 1.0, -1.0).is_err());
    }

    #[test]
    fn absolute_certificate_formula() {
        let phi1 = 1.0 / 2000.0;
        let b = absolute_certificate(0.5, phi1).unwrap();
        let want = 3.0 / 2f64.ln() * (2000f64.ln() + 3f64.ln() + 2.0 + 1.5 * 3f64.ln() / 3.0 * 0.5);
        assert!((b - want).abs() < 1e-12);
        // 1 − v ≥ e^{−αv} on [0, 2/3]
        for k in 0..=100 {
            let v = k as f64 / 150.0;
            assert!(1.0 - v >= (-ALPHA * v).exp() - 1e-15);
        }
    }

    #[test]
    fn labels_partition_rounds() {
        let eps = LossKind::EpsBall { eps: 0.1 };
        assert_eq!(classify_round(&record(1, 0.0, 0.5, 0.0), &eps, 10), CaseLabel::CleanLoss1);
        assert_eq!(classify_round(&record(1, 0.45, 0.5, 0.0), &eps, 10), CaseLabel::CleanLoss0);
        assert_eq!(classify_round(&record(1, 0.45, 0.5, -0.2), &eps, 10), CaseLabel::Corrupted);

        let abs = LossKind::Absolute;
        assert_eq!(classify_round(&record(1, 0.45, 0.5, 0.0), &abs, 10), CaseLabel::S1);
        assert_eq!(classify_round(&record(1, 0.0, 0.5, 0.0), &abs, 10), CaseLabel::S2);
        assert_eq!(classify_round(&record(1, 0.0, 0.5, 0.1), &abs, 10), CaseLabel::S2);
        let flipped = record(1, 0.0, 0.5, -0.6);
        assert_eq!(classify_round(&flipped, &abs, 10), CaseLabel::S3);
        assert!(flipped.z.abs() >= flipped.loss_clean);
    }

    #[test]
    fn negative_control_reports_violation() {
        let trace = PotentialTrace {
            radius: 0.05,
            exact: true,
            phi: vec![
                Potential { value: 0.05, std_err: 0.0 },
                Potential { value: 0.07, std_err: 0.0 },
            ],
            labels: vec![CaseLabel::CleanLoss1],
            clean_gap: vec![0.5],
            abs_z: vec![0.0],
        };
        let r = verify_case_transitions(&trace, 10);
        assert_eq!(r.checked, 1);
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].equality);
    }

    #[test]
    fn audit_rejects_mismatched_models() {
        let recs = vec![record(1, 0.0, 0.5, 0.0)];
        let eps = LossKind::EpsBall { eps: 0.1 };
        assert!(audit(&recs, &[0.5], &eps, FactorModel::Linear, 0, 0).is_err());
        assert!(audit(&recs, &[0.5], &eps, FactorModel::Slab { eps: 0.05 }, 0, 0).is_err());
        assert!(audit(&recs, &[0.5], &LossKind::Absolute, FactorModel::Linear, 0, 0).is_err());
        let r = audit(&recs, &[0.5], &eps, FactorModel::Slab { eps: 0.1 }, 0, 0).unwrap();
        assert!(r.passed());
        assert_eq!(r.trace.phi.len(), 2);
    }
}
