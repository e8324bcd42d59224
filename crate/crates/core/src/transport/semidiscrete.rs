//! Transport from a sample to the uniform measure on Λ_n, discretised on a
//! regular grid and solved exactly as a min-cost flow.
//!
//! Every sample point carries mass n/N and every one of the G = g^d cells
//! carries mass n/G (the sample is normalised to the mass n of the window).
//! In integer units a point supplies G and a cell demands N. Squared
//! toroidal distances to cell centres are rounded to integers on a 2^40
//! scale for the simplex; the reported cost uses the unrounded distances.
//!
//! The flow network starts from arcs to nearby cells only. After each solve
//! the potentials are checked against every (point, cell) pair and the
//! violating arcs are added, so the final flow is optimal for the dense
//! problem.

use crate::error::{Error, Result};
use crate::geometry::Window;
use crate::process::PointSet;

use super::netsimplex::NetworkSimplex;

const COST_RESOLUTION: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy)]
pub struct SemidiscreteOptions {
    /// Target number of grid cells per sample point (q).
    pub grid_per_point: usize,
    /// Initial arcs per point, as a multiple of the mean number of cells
    /// per point.
    pub initial_reach: f64,
    /// Violating arcs added per point and round.
    pub arcs_per_round: usize,
    pub max_rounds: usize,
}

impl Default for SemidiscreteOptions {
    fn default() -> Self {
        Self { grid_per_point: 4, initial_reach: 6.0, arcs_per_round: 16, max_rounds: 200 }
    }
}

/// Optimal plan: `(point, cell, mass)` triples with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cells_per_axis: usize,
    pub source_mass: f64,
    pub cell_mass: f64,
    pub entries: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct SemidiscreteResult {
    /// W̃₂² between the normalised sample and the grid measure.
    pub cost: f64,
    pub plan: TransportPlan,
    /// n·d·(h/2)² for cell width h: the squared W₂ between the grid measure
    /// and Lebesgue measure on Λ_n is at most this.
    pub quantization_bound: f64,
    pub rounds: usize,
    pub pivots: u64,
}

/// Regular grid of g^d cells over a window.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub d: usize,
    pub g: usize,
    pub width: f64,
    pub half: f64,
}

impl Grid {
    pub fn new(w: &Window, g: usize) -> Self {
        Self { d: w.dim(), g, width: w.side() / g as f64, half: 0.5 * w.side() }
    }

    pub fn count(&self) -> usize {
        self.g.pow(self.d as u32)
    }

    pub fn center(&self, mut idx: usize, out: &mut [f64]) {
        for i in (0..self.d).rev() {
            out[i] = -self.half + ((idx % self.g) as f64 + 0.5) * self.width;
            idx /= self.g;
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.count() * self.d];
        for (j, c) in out.chunks_exact_mut(self.d).enumerate() {
            self.center(j, c);
        }
        out
    }

    fn axis_cell(&self, x: f64) -> i64 {
        (((x + self.half) / self.width).floor() as i64).clamp(0, self.g as i64 - 1)
    }

    /// Cells whose centres are within `radius` (toroidally) of `x`.
    fn cells_near(&self, w: &Window, x: &[f64], radius: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let reach = (radius / self.width).ceil() as i64 + 1;
        let g = self.g as i64;
        let axis: Vec<Vec<(usize, f64)>> = x
            .iter()
            .map(|&xi| {
                let c = self.axis_cell(xi);
                let mut cells: Vec<i64> = if 2 * reach + 1 >= g {
                    (0..g).collect()
                } else {
                    (c - reach..=c + reach).map(|k| k.rem_euclid(g)).collect()
                };
                cells.sort_unstable();
                cells.dedup();
                cells
                    .into_iter()
                    .map(|k| {
                        let centre = -self.half + (k as f64 + 0.5) * self.width;
                        let gap = w.axis_gap(xi, centre);
                        (k as usize, gap * gap)
                    })
                    .filter(|&(_, g2)| g2 <= radius * radius)
                    .collect()
            })
            .collect();
        let r2 = radius * radius;
        let mut stack = vec![(0usize, 0usize, 0.0f64)];
        while let Some((level, idx, acc)) = stack.pop() {
            if level == self.d {
                out.push((idx, acc));
                continue;
            }
            for &(k, g2) in &axis[level] {
                let s = acc + g2;
                if s <= r2 {
                    stack.push((level + 1, idx * self.g + k, s));
                }
            }
        }
    }
}

/// Cubic blocks of grid cells with the largest cell potential per block,
/// used to skip most cells in the dual feasibility scan.
struct Blocks {
    d: usize,
    per_axis: usize,
    count: usize,
    members: Vec<Vec<usize>>,
    /// Extreme centre coordinates of each block slab along an axis.
    span: Vec<(f64, f64)>,
    /// Block coordinates, d per block.
    digits: Vec<usize>,
    max_pi: Vec<i64>,
    global_max: i64,
}

impl Blocks {
    fn new(grid: &Grid) -> Self {
        let d = grid.d;
        let side_cells = ((16f64).powf(1.0 / d as f64).round() as usize).clamp(1, grid.g);
        let per_axis = grid.g.div_ceil(side_cells);
        let count = per_axis.pow(d as u32);
        let mut members = vec![Vec::new(); count];
        for j in 0..grid.count() {
            let (mut idx, mut b) = (j, 0);
            let mut digits = vec![0; d];
            for a in (0..d).rev() {
                digits[a] = idx % grid.g;
                idx /= grid.g;
            }
            for &k in &digits {
                b = b * per_axis + k / side_cells;
            }
            members[b].push(j);
        }
        let span = (0..per_axis)
            .map(|kb| {
                let first = kb * side_cells;
                let last = ((kb + 1) * side_cells).min(grid.g) - 1;
                let c = |k: usize| -grid.half + (k as f64 + 0.5) * grid.width;
                (c(first), c(last))
            })
            .collect();
        let mut digits = vec![0; count * d];
        for b in 0..count {
            let mut r = b;
            for a in (0..d).rev() {
                digits[b * d + a] = r % per_axis;
                r /= per_axis;
            }
        }
        Self { d, per_axis, count, members, span, digits, max_pi: vec![i64::MIN; count], global_max: i64::MIN }
    }

    fn update(&mut self, cell_pi: &[i64]) {
        for (b, m) in self.members.iter().enumerate() {
            self.max_pi[b] = m.iter().map(|&j| cell_pi[j]).max().unwrap_or(i64::MIN);
        }
        self.global_max = self.max_pi.iter().copied().max().unwrap_or(i64::MIN);
    }

    fn coord(&self, b: usize, axis: usize) -> usize {
        self.digits[b * self.d + axis]
    }

    /// Squared toroidal gap from x to the nearest centre of every block
    /// slab, per axis.
    fn axis_bounds(&self, w: &Window, x: &[f64], out: &mut [f64]) {
        for (a, &xa) in x.iter().enumerate() {
            for (kb, &(lo, hi)) in self.span.iter().enumerate() {
                let g = if xa >= lo && xa <= hi { 0.0 } else { w.axis_gap(xa, lo).min(w.axis_gap(xa, hi)) };
                out[a * self.per_axis + kb] = g * g;
            }
        }
    }
}

/// Optimal W₂ transport on the circle of length `side` between N equal
/// atoms at the sample points and g equal atoms at the sorted cell
/// centres. The optimal plan is the monotone coupling of the quantile
/// functions with the target rotated by some mass θ; the lifted cost C(θ)
/// is convex, so θ is found by golden-section search. Returns C(θ*) for
/// probability measures and the plan in units of 1/(N·g).
fn circle_w2(p: &PointSet, centers: &[f64], side: f64) -> (f64, Vec<(usize, usize, f64)>) {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p.point(a)[0].total_cmp(&p.point(b)[0]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| p.point(i)[0]).collect();
    let (nn, g) = (xs.len() as f64, centers.len() as f64);
    // Work on a time axis scaled by N·g so source breakpoints are integers.
    let walk = |theta: f64, mut visit: Option<&mut Vec<(usize, usize, f64)>>| -> f64 {
        let shift = theta * nn * g;
        let lift = (theta).floor();
        let mut k = lift;
        let frac = theta - lift;
        let mut j = ((frac * g).floor() as usize).min(centers.len() - 1);
        let mut t = 0.0;
        let mut i = 0;
        let mut total = 0.0;
        let mut next_src = g;
        let mut next_tgt = ((k * g + j as f64 + 1.0) * nn) - shift;
        while i < xs.len() {
            let e = next_src.min(next_tgt);
            let len = e - t;
            if len > 0.0 {
                let diff = xs[i] - centers[j] - k * side;
                total += diff * diff * len;
                if let Some(v) = visit.as_deref_mut() {
                    v.push((order[i], j, len));
                }
            }
            t = e;
            if next_src == e {
                i += 1;
                next_src += g;
            }
            if next_tgt == e {
                j += 1;
                if j == centers.len() {
                    j = 0;
                    k += 1.0;
                }
                next_tgt += nn;
            }
        }
        total / (nn * g)
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-1.0f64, 1.0f64);
    let mut c = b - phi * (b - a);
    let mut dd = a + phi * (b - a);
    let (mut fc, mut fd) = (walk(c, None), walk(dd, None));
    while b - a > 1e-14 {
        if fc <= fd {
            b = dd;
            dd = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = walk(c, None);
        } else {
            a = c;
            c = dd;
            fc = fd;
            dd = a + phi * (b - a);
            fd = walk(dd, None);
        }
    }
    let theta = if fc <= fd { c } else { dd };
    let mut entries = Vec::new();
    let cost = walk(theta, Some(&mut entries));
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for e in entries {
        match merged.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => merged.push(e),
        }
    }
    (cost, merged)
}

/// Volume of the unit ball in R^d.
fn ball_volume(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI * PI / 2.0,
    }
}

/// Cells per axis for a sample of `count` points (at least one point).
pub(crate) fn cells_per_axis(d: usize, count: usize, q: usize) -> usize {
    let target = (q * count.max(1)) as f64;
    let mut g = target.powf(1.0 / d as f64).round().max(1.0) as usize;
    while g.pow(d as u32) < q * count.max(1) {
        g += 1;
    }
    g
}

/// Semidiscrete W̃₂² between the normalised sample (n/N)·Σδ_x and Lebesgue
/// measure on Λ_n, discretised on about q·N cells. An empty sample is
/// replaced by n·δ_0.
pub fn semidiscrete_w2(p: &PointSet, opts: &SemidiscreteOptions) -> Result<SemidiscreteResult> {
    if opts.grid_per_point == 0 {
        return Err(Error::InvalidParameter("grid_per_point must be at least 1".into()));
    }
    let w = p.window();
    let d = w.dim();
    let n = w.n();
    let count = p.len();
    let g = cells_per_axis(d, count, opts.grid_per_point);
    let grid = Grid::new(w, g);
    let cells = grid.count();
    let centers = grid.centers();
    let quantization_bound = n * d as f64 * (0.5 * grid.width).powi(2);
    let cell_mass = n / cells as f64;

    if count == 0 {
        let origin = vec![0.0; d];
        let cost = centers.chunks_exact(d).map(|c| w.dist2(&origin, c)).sum::<f64>() * cell_mass;
        let entries = (0..cells).map(|j| (0, j, cell_mass)).collect();
        return Ok(SemidiscreteResult {
            cost,
            plan: TransportPlan { cells_per_axis: g, source_mass: n, cell_mass, entries },
            quantization_bound,
            rounds: 0,
            pivots: 0,
        });
    }

    if d == 1 {
        let (cost, entries) = circle_w2(p, &centers, w.side());
        let scale = n / (count * cells) as f64;
        return Ok(SemidiscreteResult {
            cost: cost * n,
            plan: TransportPlan {
                cells_per_axis: g,
                source_mass: n / count as f64,
                cell_mass,
                entries: entries.into_iter().map(|(i, j, m)| (i, j, m * scale)).collect(),
            },
            quantization_bound,
            rounds: 0,
            pivots: 0,
        });
    }
    network_w2(p, &grid, &centers, opts, quantization_bound)
}

/// The network simplex route for any dimension (used directly for d ≥ 2).
fn network_w2(p: &PointSet, grid: &Grid, centers: &[f64], opts: &SemidiscreteOptions, quantization_bound: f64) -> Result<SemidiscreteResult> {
    let w = p.window();
    let d = w.dim();
    let n = w.n();
    let count = p.len();
    let g = grid.g;
    let grid = *grid;
    let cells = grid.count();
    let cell_mass = n / cells as f64;
    let max_d2 = d as f64 * (0.5 * w.side()).powi(2);
    let scale = COST_RESOLUTION / max_d2;
    let int_cost = |d2: f64| (d2 * scale).round() as i64;

    let mut supply = vec![cells as i64; count];
    supply.extend(std::iter::repeat(-(count as i64)).take(cells));
    let mut ns = NetworkSimplex::new(supply, COST_RESOLUTION as i64 + 1)?;

    let reach_volume = opts.initial_reach * w.volume() / count as f64;
    let radius = (reach_volume / ball_volume(d)).powf(1.0 / d as f64).max(grid.width * (d as f64).sqrt());
    let mut near = Vec::new();
    for i in 0..count {
        grid.cells_near(w, p.point(i), radius, &mut near);
        for &(j, d2) in &near {
            ns.add_arc(i, count + j, int_cost(d2));
        }
    }

    let mut blocks = Blocks::new(&grid);
    let mut axis_lb = vec![0.0; d * blocks.per_axis];
    let mut violations: Vec<(i64, usize, i64)> = Vec::new();
    let mut rounds = 0;
    loop {
        ns.solve()?;
        rounds += 1;
        let mut added = 0usize;
        let cell_pi: Vec<i64> = (0..cells).map(|j| ns.potential(count + j)).collect();
        blocks.update(&cell_pi);
        for i in 0..count {
            let x = p.point(i);
            let pi_i = ns.potential(i);
            // A cell can only violate when π_j − π_i exceeds its cost.
            if blocks.global_max <= pi_i {
                continue;
            }
            violations.clear();
            blocks.axis_bounds(w, x, &mut axis_lb);
            for b in 0..blocks.count {
                let slack_max = blocks.max_pi[b] - pi_i;
                if slack_max <= 0 {
                    continue;
                }
                let lb: f64 = (0..d).map(|a| axis_lb[a * blocks.per_axis + blocks.coord(b, a)]).sum();
                if int_cost(lb) >= slack_max {
                    continue;
                }
                for &j in &blocks.members[b] {
                    let slack = cell_pi[j] - pi_i;
                    if slack <= 0 {
                        continue;
                    }
                    let c_int = int_cost(w.dist2(x, &centers[j * d..(j + 1) * d]));
                    if c_int < slack {
                        violations.push((c_int - slack, j, c_int));
                    }
                }
            }
            if violations.len() > opts.arcs_per_round {
                violations.select_nth_unstable(opts.arcs_per_round - 1);
                violations.truncate(opts.arcs_per_round);
            }
            for &(_, j, c_int) in &violations {
                ns.add_arc(i, count + j, c_int);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        if rounds >= opts.max_rounds {
            return Err(Error::NonConvergence { iterations: rounds, residual: added as f64 });
        }
    }
    if ns.artificial_flow() != 0 {
        return Err(Error::Infeasible);
    }

    let unit = n / (count as f64 * cells as f64);
    let mut cost = 0.0;
    let mut entries = Vec::new();
    for a in 0..ns.arc_count() {
        let f = ns.flow(a);
        if f > 0 {
            let (i, jj, _) = ns.arc(a);
            let j = jj - count;
            let d2 = w.dist2(p.point(i), &centers[j * d..(j + 1) * d]);
            cost += f as f64 * d2;
            entries.push((i, j, f as f64 * unit));
        }
    }
    entries.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok(SemidiscreteResult {
        cost: cost * unit,
        plan: TransportPlan { cells_per_axis: g, source_mass: n / count as f64, cell_mass, entries },
        quantization_bound,
        rounds,
        pivots: ns.pivots(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_poisson, ProcessSpec};
    use crate::transport::lsap;
    use std::f64::consts::PI;

    #[test]
    fn single_point_in_one_dimension() {
        let w = Window::new(1, 1.0).unwrap();
        let p = PointSet::from_points(w, &[vec![0.0]]).unwrap();
        for q in [4usize, 64, 1000] {
            let r = semidiscrete_w2(&p, &SemidiscreteOptions { grid_per_point: q, ..Default::default() }).unwrap();
            let width = 2.0 * PI / q as f64;
            // Midpoint rule for ∫x²dx/(2π): π²/3 − h²/12.
            assert!((r.cost - (PI * PI / 3.0 - width * width / 12.0)).abs() < 1e-9, "{}", r.cost);
        }
    }

    #[test]
    fn grid_sample_costs_nothing() {
        for d in 1..=3 {
            let w = Window::new(d, 2.0).unwrap();
            let g = 4usize;
            let grid = Grid::new(&w, g);
            let p = PointSet::new(w, grid.centers(), None, 0).unwrap();
            let r = semidiscrete_w2(&p, &SemidiscreteOptions { grid_per_point: 1, ..Default::default() }).unwrap();
            assert!(r.cost < 1e-12, "d={d}: {}", r.cost);
        }
    }

    #[test]
    fn empty_sample_uses_point_mass_at_origin() {
        let w = Window::new(2, 1.0).unwrap();
        let r = semidiscrete_w2(&PointSet::empty(w), &SemidiscreteOptions::default()).unwrap();
        // n·δ_0 to uniform on Λ_1: n·2·∫x²/(2π) = 2π²/3 up to quantization.
        assert!((r.cost - 2.0 * PI * PI / 3.0).abs() < 2.0 * r.quantization_bound);
    }

    #[test]
    fn matches_expanded_assignment() {
        for seed in 0..20 {
            let w = Window::new(2, 0.1).unwrap();
            let p = sample_poisson(&w, seed);
            if p.is_empty() || p.len() > 4 {
                continue;
            }
            let opts = SemidiscreteOptions { grid_per_point: 2, initial_reach: 0.5, ..Default::default() };
            let r = semidiscrete_w2(&p, &opts).unwrap();
            let g = r.plan.cells_per_axis;
            let grid = Grid::new(&w, g);
            let cells = grid.count();
            let centers = grid.centers();
            let n = p.len();
            // Rows: each point replicated G times; cols: each cell N times.
            let size = n * cells;
            let mut m = Vec::with_capacity(size * size);
            for r_ in 0..size {
                let i = r_ / cells;
                for c_ in 0..size {
                    let j = c_ / n;
                    m.push(w.dist2(p.point(i), &centers[2 * j..2 * j + 2]));
                }
            }
            let sol = lsap(&m, size, size).unwrap();
            let best: f64 = sol.iter().enumerate().map(|(r_, &c_)| m[r_ * size + c_]).sum::<f64>() * w.n() / size as f64;
            assert!((r.cost - best).abs() < 1e-9 * (1.0 + best), "{} vs {best}", r.cost);
        }
    }

    #[test]
    fn plan_marginals() {
        let w = Window::from_side(2, 10.0).unwrap();
        let p = crate::process::sample(&ProcessSpec::Poisson, &w, 3).unwrap();
        let r = semidiscrete_w2(&p, &SemidiscreteOptions::default()).unwrap();
        let g = r.plan.cells_per_axis;
        let mut rows = vec![0.0; p.len()];
        let mut cols = vec![0.0; g * g];
        for &(i, j, m) in &r.plan.entries {
            assert!(m > 0.0);
            rows[i] += m;
            cols[j] += m;
        }
        assert!(rows.iter().all(|&x| (x - r.plan.source_mass).abs() < 1e-9));
        assert!(cols.iter().all(|&x| (x - r.plan.cell_mass).abs() < 1e-9));
    }

    #[test]
    fn circle_solver_matches_network_simplex() {
        for (i, &n) in [0.3, 1.0, 5.0, 40.0].iter().enumerate() {
            for seed in 0..6 {
                let w = Window::new(1, n).unwrap();
                let p = sample_poisson(&w, 31 * i as u64 + seed);
                if p.is_empty() {
                    continue;
                }
                for q in [1usize, 3, 4] {
                    let opts = SemidiscreteOptions { grid_per_point: q, ..Default::default() };
                    let fast = semidiscrete_w2(&p, &opts).unwrap();
                    let g = cells_per_axis(1, p.len(), q);
                    let grid = Grid::new(&w, g);
                    let slow = network_w2(&p, &grid, &grid.centers(), &opts, 0.0).unwrap();
                    assert!((fast.cost - slow.cost).abs() <= 1e-9 * (1.0 + slow.cost), "{} vs {}", fast.cost, slow.cost);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_far_transport_converges() {
        // d = 1 displacements reach far beyond the initial arc radius.
        let w = Window::new(1, 200.0).unwrap();
        let p = sample_poisson(&w, 8);
        let opts = SemidiscreteOptions::default();
        let grid = Grid::new(&w, cells_per_axis(1, p.len(), opts.grid_per_point));
        let r = network_w2(&p, &grid, &grid.centers(), &opts, 0.0).unwrap();
        assert!(r.cost > 0.0 && r.rounds > 1);
        let dense_opts = SemidiscreteOptions { initial_reach: 1e6, ..opts };
        let dense = network_w2(&p, &grid, &grid.centers(), &dense_opts, 0.0).unwrap();
        assert!((r.cost - dense.cost).abs() < 1e-9 * dense.cost);
        let fast = semidiscrete_w2(&p, &opts).unwrap();
        assert!((r.cost - fast.cost).abs() < 1e-9 * dense.cost);
    }
}
