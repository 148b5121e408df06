//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// CDF of the projection of an hCLWE sample onto its secret direction,
/// computed by brute-force quadrature of the unnormalized density
/// `exp(−πt²) · Σ_k exp(−π(k − γt)²/β²)` on a uniform grid.
pub struct QuadratureMarginal {
    lo: f64,
    step: f64,
    cumulative: Vec<f64>,
}

impl QuadratureMarginal {
    pub fn new(gamma: f64, beta: f64) -> Self {
        let half = 4.5;
        // Aim for ~80 nodes per standard deviation of the thinnest pancake.
        let pancake_sd = beta / gamma / (2.0 * PI).sqrt();
        let pairs = ((2.0 * half) / (2.0 * pancake_sd / 80.0)).ceil().max(20_000.0) as usize;
        let cells = 2 * pairs;
        let h = 2.0 * half / cells as f64;
        let f = |t: f64| {
            let c = (gamma * t).round() as i64;
            let comb: f64 = (c - 3..=c + 3)
                .map(|k| {
                    let d = (k as f64 - gamma * t) / beta;
                    (-PI * d * d).exp()
                })
                .sum();
            (-PI * t * t).exp() * comb
        };
        let mut cumulative = Vec::with_capacity(pairs + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut left = f(-half);
        for p in 0..pairs {
            let a = -half + 2.0 * p as f64 * h;
            let mid = f(a + h);
            let right = f(a + 2.0 * h);
            acc += h / 3.0 * (left + 4.0 * mid + right);
            cumulative.push(acc);
            left = right;
        }
        let total = acc;
        cumulative.iter_mut().for_each(|c| *c /= total);
        Self {
            lo: -half,
            step: 2.0 * h,
            cumulative,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let x = (t - self.lo) / self.step;
        if x <= 0.0 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.cumulative.len() {
            return 1.0;
        }
        let frac = x - i as f64;
        self.cumulative[i] + frac * (self.cumulative[i + 1] - self.cumulative[i])
    }
}

/// `P(X ≤ x)` for `X ~ N(0, 1/(2π))` by Simpson quadrature from 0.
pub fn rho_normal_cdf(x: f64) -> f64 {
    let steps = 4000;
    let h = x / steps as f64;
    let f = |t: f64| (-PI * t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..steps {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

/// `P(X ≤ x)` for `X ~ N(0, 1)`.
pub fn unit_normal_cdf(x: f64) -> f64 {
    rho_normal_cdf(x / (2.0 * PI).sqrt())
}

/// Number of (pos, neg) pairs with pos > neg plus half the ties, over all
/// pairs.
pub fn brute_force_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}
