use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::rng;

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = V_{d-2} · 2π / d
    let (mut v, start) = if d % 2 == 0 { (1.0, 2) } else { (2.0, 3) };
    let mut k = start;
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// Volume of `B(center, radius)` in `d` dimensions.
pub fn ball_volume(d: usize, radius: f64) -> f64 {
    unit_ball_volume(d) * radius.powi(d as i32)
}

/// Uniform points in the unit ball: Gaussian direction times `U^(1/d)` radius.
#[derive(Debug, Clone)]
pub struct BallSampler {
    d: usize,
    rng: ChaCha8Rng,
}

impl BallSampler {
    pub fn new(d: usize, seed: u64) -> Self {
        Self {
            d,
            rng: rng::stream(seed),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Writes the next point into `out` (length `d`).
    pub fn next_into(&mut self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.d);
        loop {
            let mut sq = 0.0;
            for o in out.iter_mut() {
                let g: f64 = self.rng.sample(StandardNormal);
                *o = g;
                sq += g * g;
            }
            if sq > 0.0 {
                let u: f64 = self.rng.random();
                let r = u.powf(1.0 / self.d as f64) / sq.sqrt();
                out.iter_mut().for_each(|o| *o *= r);
                return;
            }
        }
    }

    /// Appends `n` points to a flat row-major buffer.
    pub fn extend(&mut self, buf: &mut Vec<f64>, n: usize) {
        let start = buf.len();
        buf.resize(start + n * self.d, 0.0);
        for chunk in buf[start..].chunks_exact_mut(self.d) {
            self.next_into(chunk);
        }
    }
}
