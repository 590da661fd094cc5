use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`; exact for polynomials of degree `≤ 2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        if dp == 0.0 {
            dp = legendre(n, x).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes needed to integrate `x^k · Π(aᵢ + bᵢx)` over `t` factors exactly.
pub fn nodes_for(t: usize, k: usize) -> usize {
    (t + k + 2).div_ceil(2)
}

/// Gauss–Legendre rule on `[lo, hi]` for a product of affine factors, kept in log space.
///
/// Appending a factor costs `O(n)`; when the degree outgrows the rule, the
/// rule is rebuilt with twice the nodes.
#[derive(Debug, Clone)]
pub struct NodeRule {
    lo: f64,
    hi: f64,
    base_ln: f64,
    factors: Vec<(f64, f64)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_vals: Vec<f64>,
}

impl NodeRule {
    pub fn new(lo: f64, hi: f64, base_ln: f64) -> Self {
        let mut r = Self {
            lo,
            hi,
            base_ln,
            factors: Vec::new(),
            nodes: Vec::new(),
            weights: Vec::new(),
            log_vals: Vec::new(),
        };
        r.rebuild(8);
        r
    }

    fn rebuild(&mut self, n: usize) {
        let (x, w) = gauss_legendre(n);
        let (c, h) = (0.5 * (self.hi + self.lo), 0.5 * (self.hi - self.lo));
        self.nodes = x.iter().map(|x| c + h * x).collect();
        self.weights = w.iter().map(|w| w * h).collect();
        self.log_vals = self
            .nodes
            .iter()
            .map(|x| self.base_ln + self.factors.iter().map(|(a, b)| (a + b * x).ln()).sum::<f64>())
            .collect();
    }

    /// Multiplies the integrand by `a + b·x`.
    pub fn push(&mut self, a: f64, b: f64) {
        self.factors.push((a, b));
        let need = nodes_for(self.factors.len(), 1);
        if need > self.nodes.len() {
            self.rebuild(need.max(2 * self.nodes.len()));
        } else {
            for (lv, x) in self.log_vals.iter_mut().zip(&self.nodes) {
                *lv += (a + b * x).ln();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn shift(&self) -> f64 {
        self.log_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `ln ∫ f` over `[lo, hi]`.
    pub fn ln_mass(&self) -> f64 {
        let m = self.shift();
        let s: f64 = self.weights.iter().zip(&self.log_vals).map(|(w, lv)| w * (lv - m).exp()).sum();
        m + s.ln()
    }

    pub fn mass(&self) -> f64 {
        self.ln_mass().exp()
    }

    /// `∫ x f / ∫ f` over `[lo, hi]`.
    pub fn mean(&self) -> f64 {
        let m = self.shift();
        let (mut s0, mut s1) = (0.0, 0.0);
        for ((w, lv), x) in self.weights.iter().zip(&self.log_vals).zip(&self.nodes) {
            let v = w * (lv - m).exp();
            s0 += v;
            s1 += v * x;
        }
        s1 / s0
    }
}
