//! Shared vocabulary: contexts, feedback signs, losses, and corruption accounting.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

const UNIT_TOL: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A unit-norm context direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Context(Vec<f64>);

impl Context {
    /// Builds a context from a vector that is already unit norm (within 1e-12).
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(param_err("context must have dimension >= 1"));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(param_err("context has non-finite entries"));
        }
        let n = norm(&u);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(param_err(format!("context norm {n} is not 1")));
        }
        Ok(Self(u))
    }

    /// Normalizes any nonzero finite vector to a context.
    pub fn from_direction(v: &[f64]) -> Result<Self> {
        normalize_context(v).map(|(u, _)| u)
    }

    /// Standard basis vector `e_{axis}` (0-based) in dimension `d`.
    pub fn axis(d: usize, axis: usize) -> Result<Self> {
        if axis >= d {
            return Err(param_err(format!("axis {axis} out of range for d = {d}")));
        }
        let mut u = vec![0.0; d];
        u[axis] = 1.0;
        Ok(Self(u))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }
}

impl TryFrom<Vec<f64>> for Context {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Context::new(v)
    }
}

impl From<Context> for Vec<f64> {
    fn from(c: Context) -> Self {
        c.0
    }
}

/// Rescales a context with `0 < ‖v‖ ≤ 1` to unit norm.
///
/// Returns the unit context and the original norm. A learner queried with the
/// unit context produces `ŷ`; the query for the original context is `ŷ · scale`.
pub fn normalize_context(v: &[f64]) -> Result<(Context, f64)> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(param_err("context vector must be nonempty and finite"));
    }
    let scale = norm(v);
    if scale <= 0.0 {
        return Err(param_err("cannot normalize a zero context vector"));
    }
    let mut u: Vec<f64> = v.iter().map(|x| x / scale).collect();
    // one refinement pass keeps ‖u‖ within 1e-12 even for badly scaled inputs
    let n = norm(&u);
    u.iter_mut().for_each(|x| *x /= n);
    Ok((Context(u), scale))
}

/// Binary feedback. `sign(0)` is `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    /// Sign of `v` with the tie rule `sign(0) = +1`.
    pub fn of(v: f64) -> Self {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            other => Err(format!("feedback sign must be -1 or +1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

/// The loss charged per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `1{|y − y*| ≥ ε}`.
    EpsBall { eps: f64 },
    /// `|y − y*|`.
    Absolute,
}

impl LossKind {
    pub fn eps_ball(eps: f64) -> Result<Self> {
        check_eps(eps)?;
        Ok(LossKind::EpsBall { eps })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::EpsBall { eps } => check_eps(eps),
            LossKind::Absolute => Ok(()),
        }
    }

    pub fn loss(&self, y: f64, y_star: f64) -> f64 {
        match *self {
            LossKind::EpsBall { eps } => {
                if (y - y_star).abs() >= eps {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Absolute => absolute_loss(y, y_star),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(param_err(format!("ε-ball loss needs 0 < ε < 1, got {eps}")))
    }
}

/// ε-ball loss: 1 when the query misses the target by at least `eps`.
pub fn eps_ball_loss(y: f64, y_star: f64, eps: f64) -> Result<u8> {
    check_eps(eps)?;
    Ok(u8::from((y - y_star).abs() >= eps))
}

pub fn absolute_loss(y: f64, y_star: f64) -> f64 {
    (y - y_star).abs()
}

/// One round of interaction as seen by the harness (not by the learner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub u: Context,
    pub z: f64,
    pub y: f64,
    pub sigma: Sign,
    pub y_star_clean: f64,
    pub y_star_corrupt: f64,
    pub loss_clean: f64,
    pub loss_corrupt: f64,
    /// Centroid the log-concave learner used this round; its update depends on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<Vec<f64>>,
    /// Estimator error reported by the learner for this query (0 when exact).
    #[serde(default, with = "lossless_float")]
    pub est_error: f64,
}

/// Per-round corruption levels, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorruptionTrace(Vec<f64>);

impl CorruptionTrace {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if let Some(bad) = z.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(param_err(format!("corruption level {bad} outside [-1, 1]")));
        }
        Ok(Self(z))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Corruption totals `(C₀, C₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorruptionTotals {
    /// Number of rounds with `z ≠ 0` (exact test).
    pub c0: usize,
    /// `Σ |z|`.
    pub c1: f64,
}

pub fn corruption_totals(trace: &CorruptionTrace) -> CorruptionTotals {
    let z = trace.as_slice();
    CorruptionTotals {
        c0: z.iter().filter(|v| **v != 0.0).count(),
        c1: z.iter().map(|v| v.abs()).sum(),
    }
}


/// JSON has no infinities; non-finite values travel as the strings `inf`, `-inf`, `nan`.
pub(crate) mod lossless_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string().to_lowercase())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
