//! The six experiments. Each defines what one (n, replica) task measures
//! and how the measurements of a sweep are aggregated into tables.

use hypermatch_core::bounds::{alpha2, alpha2_hu, bl_general_bound, bl_w1_bound, bl_w2_bound, tail_bound, weight_moment, BlVariant, QFunction};
use hypermatch_core::process::sample;
use hypermatch_core::rng::substream_seed;
use hypermatch_core::spectral::{
    core_distances, enumerate_modes, fourier_coeff_sq, scattering_intensity, spread_modes, wavevector, EmpiricalCdf,
};
use hypermatch_core::stats::{quantile_sorted, variance_with_stderr, Moments};
use hypermatch_core::transport::{
    dyadic_matching, exact_matching, semidiscrete_w2, sinkhorn_w2, stable_matching, SemidiscreteOptions, SinkhornOptions,
};
use hypermatch_core::{CostFn, PointSet, ProcessSpec, RpcmModel, Window};

use crate::config::{Experiment, ExperimentConfig, SolverChoice};
use crate::error::{HResult, HarnessError};
use crate::record::{Table, TaskResult};
use crate::runner::Task;

/// Relative disagreement allowed between the exact and entropic solvers at
/// the cutoff.
pub const SOLVER_AGREEMENT: f64 = 0.05;

/// Radii of the log-spaced tail-probability table and of the slope fit.
const CDF_POINTS: usize = 40;
const SLOPE_POINTS: usize = 20;

pub trait Job: Sync {
    fn windows(&self) -> usize;
    fn run(&self, task: &Task) -> HResult<Vec<f64>>;
    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>>;
}

pub fn prepare(cfg: &ExperimentConfig) -> HResult<Box<dyn Job>> {
    let windows = cfg.windows()?;
    let process = cfg.process()?;
    let model = RpcmModel::for_process(&process, cfg.params.d);
    let common = Common { cfg: cfg.clone(), windows, process, model };
    Ok(match cfg.experiment {
        Experiment::Rates => Box::new(Rates::new(common)),
        Experiment::Spectrum => Box::new(Spectrum::new(common)?),
        Experiment::Variance => Box::new(Variance { c: common }),
        Experiment::Tails => Box::new(Tails::new(common)?),
        Experiment::BlCheck => Box::new(BlCheck::new(common)?),
        Experiment::MatchingMoments => Box::new(MatchingMoments::new(common)?),
    })
}

struct Common {
    cfg: ExperimentConfig,
    windows: Vec<Window>,
    process: ProcessSpec,
    model: Option<RpcmModel>,
}

impl Common {
    fn by_window<'a>(&self, tasks: &'a [TaskResult]) -> impl Iterator<Item = (usize, &'a [TaskResult])> {
        tasks.chunks(self.cfg.replicas).enumerate()
    }

    /// Reduced variance σ(n) of the process on window `w`, when known.
    fn sigma(spec: &ProcessSpec, model: Option<&RpcmModel>, w: &Window) -> HResult<Option<f64>> {
        Ok(match (spec, model) {
            (_, Some(m)) => Some(m.predicted_variance(w.n())? / w.volume()),
            (ProcessSpec::ShiftedLattice, None) => Some(0.0),
            _ => None,
        })
    }
}

fn column(tasks: &[TaskResult], j: usize) -> Vec<f64> {
    tasks.iter().map(|t| t.values[j]).collect()
}

fn moments(xs: &[f64]) -> Moments {
    xs.iter().copied().collect()
}

/// Independent streams for the parts of one task.
fn part_seed(task: &Task, part: u64) -> u64 {
    substream_seed(task.seed, part)
}

// ---------------------------------------------------------------- rates

struct Rates {
    c: Common,
    solver: Vec<SolverChoice>,
    guard: Option<usize>,
}

impl Rates {
    fn new(c: Common) -> Self {
        let p = &c.cfg.params;
        let solver: Vec<SolverChoice> = c
            .windows
            .iter()
            .map(|w| match p.solver {
                // The exact circle solver is linear in d = 1.
                SolverChoice::Auto if p.d > 1 && w.volume() > p.sinkhorn_cutoff => SolverChoice::Sinkhorn,
                SolverChoice::Auto => SolverChoice::Exact,
                s => s,
            })
            .collect();
        let guard = if solver.contains(&SolverChoice::Sinkhorn) && p.solver == SolverChoice::Auto {
            solver.iter().rposition(|s| *s == SolverChoice::Exact)
        } else {
            None
        };
        Self { c, solver, guard }
    }

    fn sinkhorn(&self, p: &PointSet) -> HResult<f64> {
        let opts = SinkhornOptions { grid_per_point: self.c.cfg.params.grid_per_point, ..Default::default() };
        Ok(sinkhorn_w2(p, &opts)?.cost)
    }
}

impl Job for Rates {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [N, cost, solver (0 exact, 1 entropic), entropic cross-check or NaN].
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        let p = sample(&self.c.process, w, t.seed)?;
        let (cost, flag) = match self.solver[t.n_index] {
            SolverChoice::Sinkhorn => (self.sinkhorn(&p)?, 1.0),
            _ => {
                let opts = SemidiscreteOptions { grid_per_point: self.c.cfg.params.grid_per_point, ..Default::default() };
                (semidiscrete_w2(&p, &opts)?.cost, 0.0)
            }
        };
        let mut check = f64::NAN;
        if self.guard == Some(t.n_index) && t.replica == 0 {
            check = self.sinkhorn(&p)?;
            let rel = (check - cost).abs() / cost.abs().max(f64::MIN_POSITIVE);
            if !(rel <= SOLVER_AGREEMENT) {
                return Err(HarnessError::Guard(format!(
                    "exact cost {cost} and entropic cost {check} differ by {:.1}% at |Λ_n| = {}",
                    100.0 * rel,
                    w.volume()
                )));
            }
        }
        Ok(vec![p.len() as f64, cost, flag, check])
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let d = self.c.cfg.params.d;
        let mut t = Table::new(
            "rates",
            &[
                "n", "W2sq_mean", "W2sq_se", "alpha2", "ratio", "expected_count", "mean_count", "cost_per_n", "alpha2_hu", "ratio_hu",
                "rescaled_mean", "solver",
            ],
        );
        for (i, ts) in self.c.by_window(tasks) {
            let w = &self.c.windows[i];
            let n = w.n();
            let cost = moments(&column(ts, 1));
            let count = moments(&column(ts, 0));
            let b_n = match &self.c.model {
                Some(m) => m.b_n(n)?,
                None => 1.0,
            };
            // The rate functions are defined for n ≥ 2 only.
            let a2 = if n >= 2.0 { alpha2(n, b_n, d)? } else { f64::NAN };
            let hu = match &self.c.model {
                Some(m) if m.is_integrable() => alpha2_hu(n, m, self.c.cfg.params.c0)?,
                _ => f64::NAN,
            };
            t.push(vec![
                n,
                cost.mean,
                cost.stderr(),
                a2,
                cost.mean / a2,
                w.volume(),
                count.mean,
                cost.mean / n,
                hu,
                cost.mean / hu,
                cost.mean / (n * n.powf(2.0 / d as f64)),
                ts[0].values[2],
            ]);
        }
        Ok(vec![t])
    }
}

// ---------------------------------------------------------------- spectrum

struct Spectrum {
    c: Common,
    modes: Vec<Vec<Vec<i64>>>,
}

impl Spectrum {
    fn new(c: Common) -> HResult<Self> {
        let p = &c.cfg.params;
        let mut modes = Vec::new();
        for w in &c.windows {
            let t0 = p.t0.unwrap_or(p.c0 * w.scale());
            let m = spread_modes(p.d, t0, p.modes);
            if m.is_empty() {
                return Err(HarnessError::Config(format!("no modes with ‖m‖ ≤ {t0}")));
            }
            modes.push(m);
        }
        Ok(Self { c, modes })
    }
}

impl Job for Spectrum {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [N, (|Λ_n|/N)·S_n(k) for each mode].
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        let p = sample(&self.c.process, w, t.seed)?;
        let n = p.len() as f64;
        let mut out = vec![n];
        for m in &self.modes[t.n_index] {
            let s = scattering_intensity(&p, m)?;
            out.push(if n > 0.0 { w.volume() / n * s } else { 0.0 });
        }
        Ok(out)
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let d = self.c.cfg.params.d;
        let mut cols: Vec<String> = vec!["n".into()];
        cols.extend((1..=d).map(|i| format!("m{i}")));
        cols.extend(
            ["k_norm", "mean", "stderr", "S_model", "S_windowed", "count_var", "predicted", "z"].iter().map(|s| s.to_string()),
        );
        let names: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
        let mut t = Table::new("spectrum", &names);
        for (i, ts) in self.c.by_window(tasks) {
            let w = &self.c.windows[i];
            let counts = moments(&column(ts, 0));
            let var = counts.variance();
            for (j, m) in self.modes[i].iter().enumerate() {
                let vals = moments(&column(ts, j + 1));
                let k = wavevector(w, m);
                let (s_model, s_win) = match &self.c.model {
                    Some(model) if model.is_integrable() => (model.structure_factor(&k)?, model.windowed_structure_factor(&k, w.n())?),
                    _ => (f64::NAN, f64::NAN),
                };
                let predicted = s_win + var / (w.volume() * w.volume());
                let mut row = vec![w.n()];
                row.extend(m.iter().map(|&x| x as f64));
                row.extend([
                    k.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    vals.mean,
                    vals.stderr(),
                    s_model,
                    s_win,
                    var,
                    predicted,
                    (vals.mean - predicted) / vals.stderr(),
                ]);
                t.push(row);
            }
        }
        Ok(vec![t])
    }
}

// ---------------------------------------------------------------- variance

struct Variance {
    c: Common,
}

impl Job for Variance {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [N] for the stationary process restricted to Λ_n.
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        Ok(vec![hypermatch_core::process::sample_restricted(&self.c.process, w, t.seed)?.len() as f64])
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let mut t = Table::new(
            "variance",
            &["n", "volume", "mean_count", "var", "var_se", "sigma", "sigma_se", "predicted_var", "predicted_sigma", "z"],
        );
        for (i, ts) in self.c.by_window(tasks) {
            let w = &self.c.windows[i];
            let counts = column(ts, 0);
            let (var, se) = variance_with_stderr(&counts);
            let pred = match &self.c.model {
                Some(m) => m.predicted_variance(w.n())?,
                None => f64::NAN,
            };
            let vol = w.volume();
            t.push(vec![w.n(), vol, moments(&counts).mean, var, se, var / vol, se / vol, pred, pred / vol, (var - pred) / se]);
        }
        Ok(vec![t])
    }
}

// ---------------------------------------------------------------- tails

struct Tails {
    c: Common,
    target: ProcessSpec,
    target_model: Option<RpcmModel>,
    cost: CostFn,
}

impl Tails {
    fn new(c: Common) -> HResult<Self> {
        let target = c.cfg.target()?;
        let target_model = RpcmModel::for_process(&target, c.cfg.params.d);
        let cost = c.cfg.cost()?;
        Ok(Self { c, target, target_model, cost })
    }
}

impl Job for Tails {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [unmatched, closure pairs, core distances of the dyadic levels...].
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        let a = sample(&self.c.process, w, part_seed(t, 1))?;
        let b = sample(&self.target, w, part_seed(t, 2))?;
        let m = dyadic_matching(&a, &b, &self.cost, part_seed(t, 3))?;
        let depth = w.side().log2().round() as i32;
        let dyadic = m.without_level_above(depth);
        let closure = m.len() - dyadic.len();
        let mut out = vec![(m.unmatched_source.len() + m.unmatched_target.len()) as f64, closure as f64];
        if !dyadic.is_empty() {
            match core_distances(&dyadic, &a, self.c.cfg.params.core_fraction) {
                Ok(ds) => out.extend(ds),
                Err(hypermatch_core::Error::EmptyCore) => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let p = &self.c.cfg.params;
        let mut summary = Table::new(
            "tails",
            &[
                "n", "side", "pooled", "tail_points", "median", "q99", "slope", "closure_pairs", "unmatched", "sigma_source", "sigma_target",
                "weight_moment",
            ],
        );
        let mut cdf = Table::new("tails_cdf", &["n", "r", "tail", "bound"]);
        for (i, ts) in self.c.by_window(tasks) {
            let w = &self.c.windows[i];
            let pooled: Vec<f64> = ts.iter().flat_map(|t| t.values[2..].iter().copied()).collect();
            let closure: f64 = column(ts, 1).iter().sum();
            let unmatched: f64 = column(ts, 0).iter().sum();
            if pooled.is_empty() {
                return Err(HarnessError::InsufficientTailData { found: 0, needed: p.min_tail_points });
            }
            let e = EmpiricalCdf::from_samples(pooled.clone());
            let median = e.quantile(0.5);
            let q99 = e.quantile(0.99);
            let tail_points = e.samples().iter().filter(|&&x| x >= median).count();
            if tail_points < p.min_tail_points {
                return Err(HarnessError::InsufficientTailData { found: tail_points, needed: p.min_tail_points });
            }
            let slope = e.tail_slope(median, q99, SLOPE_POINTS).unwrap_or(f64::NAN);
            let s_a = Common::sigma(&self.c.process, self.c.model.as_ref(), w)?;
            let s_b = Common::sigma(&self.target, self.target_model.as_ref(), w)?;
            let moment = weight_moment(&pooled, p.d, p.gamma)?;
            summary.push(vec![
                w.n(),
                w.side(),
                pooled.len() as f64,
                tail_points as f64,
                median,
                q99,
                slope,
                closure,
                unmatched,
                s_a.unwrap_or(f64::NAN),
                s_b.unwrap_or(f64::NAN),
                moment,
            ]);
            let lo = e.samples().iter().copied().find(|&x| x > 0.0).unwrap_or(median);
            let hi = e.samples().last().copied().unwrap_or(q99).max(lo * 1.0001);
            for k in 0..CDF_POINTS {
                let r = lo * (hi / lo).powf(k as f64 / (CDF_POINTS - 1) as f64);
                let bound = match (s_a, s_b) {
                    (Some(x), Some(y)) => tail_bound(r, x, y, p.d)?,
                    _ => f64::NAN,
                };
                cdf.push(vec![w.n(), r, e.tail(r), bound]);
            }
        }
        Ok(vec![summary, cdf])
    }
}

// ---------------------------------------------------------------- bl-check

struct BlCheck {
    c: Common,
    modes: Vec<(f64, Vec<Vec<i64>>)>,
    q: QFunction,
}

impl BlCheck {
    fn new(c: Common) -> HResult<Self> {
        let p = &c.cfg.params;
        let modes = c
            .windows
            .iter()
            .map(|w| {
                let t0 = p.t0.unwrap_or(p.c0 * w.volume().powf(1.0 / p.d as f64)).max(1.0);
                (t0, enumerate_modes(p.d, t0))
            })
            .collect();
        let q = QFunction::LogLogLog { gamma: p.gamma };
        q.validate()?;
        Ok(Self { c, modes, q })
    }
}

impl Job for BlCheck {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [N, measured W̃₂² on Λ_1, W2 bound, W1 bound, weighted-q bound,
    /// ln t₀ bound, max identity error, mean |f(m)|²].
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        let p = sample(&self.c.process, w, t.seed)?;
        let n = w.n();
        let d = w.dim() as f64;
        let opts = SemidiscreteOptions { grid_per_point: self.c.cfg.params.grid_per_point, ..Default::default() };
        let measured = semidiscrete_w2(&p, &opts)?.cost / (n * n.powf(2.0 / d));
        let (t0, modes) = &self.modes[t.n_index];
        let count = p.len() as f64;
        let mut coeffs = Vec::with_capacity(modes.len());
        let mut identity_err: f64 = 0.0;
        for m in modes {
            let f = fourier_coeff_sq(&p, m)?;
            if count > 0.0 {
                let s = scattering_intensity(&p, m)?;
                identity_err = identity_err.max((f * count - s).abs() / s.max(1.0));
            }
            coeffs.push((m.clone(), f));
        }
        let mean_coeff = coeffs.iter().map(|c| c.1).sum::<f64>() / coeffs.len().max(1) as f64;
        let w1 = CostFn::power(1.0)?;
        Ok(vec![
            count,
            measured,
            bl_w2_bound(&coeffs, *t0)?,
            bl_w1_bound(&coeffs, *t0)?,
            bl_general_bound(&coeffs, *t0, &w1, &self.q, BlVariant::WeightedQ)?,
            bl_general_bound(&coeffs, *t0, &w1, &self.q, BlVariant::LogT0)?,
            identity_err,
            mean_coeff,
        ])
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let mut t = Table::new(
            "bl_check",
            &[
                "n", "t0", "mean_count", "measured_mean", "measured_se", "bound_w2_mean", "fitted_c", "mean_ratio", "bound_w1_mean",
                "bound_weighted_q_mean", "bound_log_t0_mean", "identity_err_max", "mean_coeff", "inv_count_mean",
            ],
        );
        for (i, ts) in self.c.by_window(tasks) {
            let measured = moments(&column(ts, 1));
            let ratios: Vec<f64> = ts.iter().map(|t| t.values[1] / t.values[2]).collect();
            let fitted = ratios.iter().copied().fold(0.0, f64::max);
            let inv = moments(&ts.iter().map(|t| if t.values[0] > 0.0 { 1.0 / t.values[0] } else { 1.0 }).collect::<Vec<_>>());
            t.push(vec![
                self.c.windows[i].n(),
                self.modes[i].0,
                moments(&column(ts, 0)).mean,
                measured.mean,
                measured.stderr(),
                moments(&column(ts, 2)).mean,
                fitted,
                moments(&ratios).mean,
                moments(&column(ts, 3)).mean,
                moments(&column(ts, 4)).mean,
                moments(&column(ts, 5)).mean,
                column(ts, 6).iter().copied().fold(0.0, f64::max),
                moments(&column(ts, 7)).mean,
                inv.mean,
            ]);
        }
        Ok(vec![t])
    }
}

// ---------------------------------------------------------------- matching-moments

struct MatchingMoments {
    c: Common,
    target: ProcessSpec,
    cost: CostFn,
}

impl MatchingMoments {
    fn new(c: Common) -> HResult<Self> {
        let target = c.cfg.target()?;
        let cost = c.cfg.cost()?;
        Ok(Self { c, target, cost })
    }

    /// Lattice-type processes drawn from the same seed share the shift, so
    /// site i of one corresponds to site i of the other.
    fn coupled(&self) -> bool {
        self.c.process.is_lattice() && self.target.is_lattice()
    }
}

impl Job for MatchingMoments {
    fn windows(&self) -> usize {
        self.c.windows.len()
    }

    /// [N_source, N_target, exact cost, stable cost, canonical cost,
    /// canonical max displacement, exact weight moment, stable weight moment].
    fn run(&self, t: &Task) -> HResult<Vec<f64>> {
        let w = &self.c.windows[t.n_index];
        let p = &self.c.cfg.params;
        let a = sample(&self.c.process, w, part_seed(t, 1))?;
        let b = sample(&self.target, w, if self.coupled() { part_seed(t, 1) } else { part_seed(t, 2) })?;
        let exact = exact_matching(&a, &b, &self.cost)?;
        let stable = stable_matching(&a, &b, &self.cost)?;
        let (mut canonical, mut max_disp) = (f64::NAN, f64::NAN);
        if self.coupled() && a.len() == b.len() {
            canonical = 0.0;
            max_disp = 0.0;
            for i in 0..a.len() {
                let r = w.dist2(a.point(i), b.point(i)).sqrt();
                canonical += self.cost.eval(r);
                max_disp = max_disp.max(r);
            }
        }
        let moment = |m: &hypermatch_core::MatchResult| {
            if m.distances.is_empty() {
                Ok(f64::NAN)
            } else {
                weight_moment(&m.distances, p.d, p.gamma)
            }
        };
        Ok(vec![
            a.len() as f64,
            b.len() as f64,
            exact.total_cost,
            stable.total_cost,
            canonical,
            max_disp,
            moment(&exact)?,
            moment(&stable)?,
        ])
    }

    fn aggregate(&self, tasks: &[TaskResult]) -> HResult<Vec<Table>> {
        let mut t = Table::new(
            "matching_moments",
            &[
                "n", "mean_count", "exact_mean", "exact_se", "stable_mean", "stable_se", "canonical_mean", "canonical_max_disp",
                "exact_le_canonical", "exact_moment", "stable_moment", "median_exact_per_point",
            ],
        );
        for (i, ts) in self.c.by_window(tasks) {
            let exact = column(ts, 2);
            let canonical = column(ts, 4);
            let le = exact.iter().zip(&canonical).filter(|(e, c)| **e <= **c * (1.0 + 1e-12) + 1e-12).count() as f64 / ts.len() as f64;
            let per_point: Vec<f64> = {
                let mut v: Vec<f64> = ts.iter().map(|t| t.values[2] / t.values[0].min(t.values[1]).max(1.0)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let e = moments(&exact);
            let s = moments(&column(ts, 3));
            t.push(vec![
                self.c.windows[i].n(),
                moments(&column(ts, 0)).mean,
                e.mean,
                e.stderr(),
                s.mean,
                s.stderr(),
                moments(&canonical).mean,
                column(ts, 5).iter().copied().fold(f64::NAN, f64::max),
                if canonical.iter().any(|c| c.is_nan()) { f64::NAN } else { le },
                moments(&column(ts, 6)).mean,
                moments(&column(ts, 7)).mean,
                quantile_sorted(&per_point, 0.5),
            ]);
        }
        Ok(vec![t])
    }
}
