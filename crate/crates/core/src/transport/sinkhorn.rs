//! Entropic approximation of the semidiscrete transport cost: log-domain
//! Sinkhorn iterations with ε-scaling on the same grid as the exact solver.

use crate::error::{Error, Result};
use crate::process::PointSet;

use super::semidiscrete::{cells_per_axis, Grid};

#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    pub grid_per_point: usize,
    /// Regularisation λ. `None` picks 0.05·s² with s = (|Λ_n|/N)^{1/d} the
    /// mean point spacing.
    pub lambda: Option<f64>,
    /// Iteration cap for the final λ.
    pub max_iterations: usize,
    /// Required L1 error of the point marginal (relative to total mass 1).
    pub tolerance: f64,
    /// Largest cost matrix (entries) the dense solver accepts.
    pub max_entries: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { grid_per_point: 4, lambda: None, max_iterations: 20_000, tolerance: 1e-6, max_entries: 40_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// n·⟨P, C⟩ for the entropic plan P (nonnegative).
    pub cost: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub marginal_error: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64>, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(values);
    let m = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + buf.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Entropic W̃₂² estimate between the normalised sample and the grid
/// measure.
pub fn sinkhorn_w2(p: &PointSet, opts: &SinkhornOptions) -> Result<SinkhornResult> {
    if p.is_empty() {
        return Err(Error::EmptyInput);
    }
    let w = p.window();
    let d = w.dim();
    let count = p.len();
    let g = cells_per_axis(d, count, opts.grid_per_point.max(1));
    let grid = Grid::new(w, g);
    let cells = grid.count();
    if count.saturating_mul(cells) > opts.max_entries {
        return Err(Error::Unsupported(format!("dense Sinkhorn with {count}×{cells} entries")));
    }
    let spacing = (w.volume() / count as f64).powf(1.0 / d as f64);
    let lambda = opts.lambda.unwrap_or(0.05 * spacing * spacing);
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda}")));
    }
    let centers = grid.centers();
    let cost: Vec<f64> = (0..count)
        .flat_map(|i| centers.chunks_exact(d).map(move |c| (i, c)))
        .map(|(i, c)| w.dist2(p.point(i), c))
        .collect();
    let cmax = cost.iter().copied().fold(0.0, f64::max);
    let ln_a = -(count as f64).ln();
    let ln_b = -(cells as f64).ln();
    let mut f = vec![0.0; count];
    let mut gpot = vec![0.0; cells];
    let mut buf = Vec::with_capacity(count.max(cells));

    let mut eps = cmax.max(lambda);
    let mut iterations = 0;
    loop {
        let last = eps <= lambda;
        let eps_now = eps.max(lambda);
        let (cap, tol) = if last { (opts.max_iterations, opts.tolerance) } else { (200, 1e-3) };
        let mut err = f64::INFINITY;
        for _ in 0..cap {
            for i in 0..count {
                let row = &cost[i * cells..(i + 1) * cells];
                f[i] = -eps_now * log_sum_exp((0..cells).map(|j| (gpot[j] - row[j]) / eps_now + ln_b), &mut buf);
            }
            for j in 0..cells {
                gpot[j] = -eps_now * log_sum_exp((0..count).map(|i| (f[i] - cost[i * cells + j]) / eps_now + ln_a), &mut buf);
            }
            iterations += 1;
            // After the g-update the cell marginal is exact; measure rows.
            err = 0.0;
            for i in 0..count {
                let row = &cost[i * cells..(i + 1) * cells];
                let s: f64 = (0..cells).map(|j| ((f[i] + gpot[j] - row[j]) / eps_now + ln_a + ln_b).exp()).sum();
                err += (s - 1.0 / count as f64).abs();
            }
            if err < tol {
                break;
            }
        }
        if last {
            if !(err < tol) {
                return Err(Error::NonConvergence { iterations, residual: err });
            }
            let mut total = 0.0;
            for i in 0..count {
                let row = &cost[i * cells..(i + 1) * cells];
                for j in 0..cells {
                    total += ((f[i] + gpot[j] - row[j]) / lambda + ln_a + ln_b).exp() * row[j];
                }
            }
            return Ok(SinkhornResult { cost: w.n() * total.max(0.0), lambda, iterations, marginal_error: err });
        }
        eps *= 0.5;
    }
}
