//! Projected gradient ascent over the capped simplex
//! `{x ≥ 0, Σ x ≤ radius}`.

use crate::error::{Error, Result};

pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 10_000;

/// A concave objective with its gradient; `value` is `-inf` outside the
/// domain.
pub trait Concave {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Euclidean projection onto `{x ≥ 0, Σ x ≤ radius}`.
pub fn project_capped_simplex(y: &[f64], radius: f64) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|&v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= radius {
        return clipped;
    }
    // Sort-based projection onto {x ≥ 0, Σ x = radius}.
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Maximises `f` from `start` (which must be feasible with finite value).
pub fn maximize<F: Concave>(f: &F, start: Vec<f64>, radius: f64) -> Result<Solution> {
    let n = start.len();
    let mut x = start;
    let mut fx = f.value(&x);
    if !fx.is_finite() {
        return Err(Error::Domain("projected ascent needs a finite starting point".into()));
    }
    let mut g = vec![0.0; n];
    let mut step: f64 = 1.0;
    for it in 0..MAX_ITERS {
        f.gradient(&x, &mut g);
        let probe: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        let p = project_capped_simplex(&probe, radius);
        let residual = p.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= GRAD_TOL {
            return Ok(Solution { x, value: fx, iterations: it });
        }
        // Backtracking with an Armijo test on the projected step.
        let mut t = (step * 2.0).min(1e12);
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + t * b).collect();
            let cand = project_capped_simplex(&trial, radius);
            let fc = f.value(&cand);
            let ascent: f64 = cand.iter().zip(&x).zip(&g).map(|((c, a), gi)| (c - a) * gi).sum();
            if fc.is_finite() && fc >= fx + 1e-4 * ascent {
                let moved = cand.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                x = cand;
                fx = fc;
                step = t;
                if moved == 0.0 {
                    return Ok(Solution { x, value: fx, iterations: it + 1 });
                }
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                // No ascent direction left at machine precision.
                return Ok(Solution { x, value: fx, iterations: it + 1 });
            }
        }
    }
    Err(Error::Convergence(format!(
        "projected gradient ascent hit {MAX_ITERS} iterations (value {fx})"
    )))
}
