//! Scattering intensity, Fourier coefficients of rescaled samples, and Monte
//! Carlo estimates of structure factors, number variance and matching
//! distance distributions.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::{f17, SCHEMA_LINE};
use crate::geometry::Window;
use crate::process::{sample, sample_restricted, PointSet, ProcessSpec};
use crate::rng::substream_seed;
use crate::stats::{linear_fit, quantile_sorted, variance_with_stderr, Moments};
use crate::transport::MatchResult;

/// Replicas simulated per parallel task. Fixed so that results do not
/// depend on the number of worker threads.
const CHUNK: usize = 16;

fn check_mode(p: &PointSet, m: &[i64]) -> Result<()> {
    if m.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: m.len() });
    }
    if m.iter().all(|&x| x == 0) {
        return Err(Error::ZeroWavevector);
    }
    Ok(())
}

/// Wavevector k = m·n^{−1/d} of an integer mode on the window.
pub fn wavevector(w: &Window, m: &[i64]) -> Vec<f64> {
    m.iter().map(|&mi| mi as f64 / w.scale()).collect()
}

/// S_n(k) = |Σ_x e^{−ik·x}|² / N at k = m·n^{−1/d}; zero for an empty
/// sample.
pub fn scattering_intensity(p: &PointSet, m: &[i64]) -> Result<f64> {
    check_mode(p, m)?;
    if p.is_empty() {
        return Ok(0.0);
    }
    let k = wavevector(p.window(), m);
    let (mut re, mut im) = (0.0, 0.0);
    for x in p.points() {
        let phase: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
        let (s, c) = phase.sin_cos();
        re += c;
        im -= s;
    }
    Ok((re * re + im * im) / p.len() as f64)
}

/// |f(m)|² for the empirical probability measure of the sample rescaled to
/// Λ_1, computed on the rescaled coordinates; one for an empty sample.
pub fn fourier_coeff_sq(p: &PointSet, m: &[i64]) -> Result<f64> {
    check_mode(p, m)?;
    if p.is_empty() {
        return Ok(1.0);
    }
    let unit = p.rescale_to_unit();
    let (mut re, mut im) = (0.0, 0.0);
    for y in unit.points() {
        let phase: f64 = y.iter().zip(m).map(|(a, &b)| a * b as f64).sum();
        re += phase.cos();
        im -= phase.sin();
    }
    let n = unit.len() as f64;
    Ok((re * re + im * im) / (n * n))
}

/// All nonzero integer modes with ‖m‖ ≤ t₀, in lexicographic order.
pub fn enumerate_modes(d: usize, t0: f64) -> Vec<Vec<i64>> {
    let r = t0.floor() as i64;
    let r2 = t0 * t0;
    let mut out = Vec::new();
    let mut m = vec![-r; d];
    if r < 0 || d == 0 {
        return out;
    }
    loop {
        let norm2: i64 = m.iter().map(|x| x * x).sum();
        if norm2 > 0 && norm2 as f64 <= r2 {
            out.push(m.clone());
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if m[i] < r {
                m[i] += 1;
                break;
            }
            m[i] = -r;
        }
    }
}

/// One representative of each ±m pair (the first nonzero entry positive);
/// S_n(k) = S_n(−k).
pub fn half_space_modes(d: usize, t0: f64) -> Vec<Vec<i64>> {
    enumerate_modes(d, t0)
        .into_iter()
        .filter(|m| m.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0))
        .collect()
}

/// `count` modes from the half space with ‖m‖ ≤ t₀, sorted by norm and
/// picked evenly across the sorted list.
pub fn spread_modes(d: usize, t0: f64, count: usize) -> Vec<Vec<i64>> {
    let mut modes = half_space_modes(d, t0);
    modes.sort_by(|a, b| {
        let na: i64 = a.iter().map(|x| x * x).sum();
        let nb: i64 = b.iter().map(|x| x * x).sum();
        na.cmp(&nb).then_with(|| a.cmp(b))
    });
    if modes.len() <= count {
        return modes;
    }
    if count == 1 {
        return vec![modes[0].clone()];
    }
    (0..count).map(|i| modes[i * (modes.len() - 1) / (count - 1)].clone()).collect()
}

/// Replica averages of (π_d n / N)·S_n(k) over a set of modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub window: Window,
    pub modes: Vec<Vec<i64>>,
    pub wavevectors: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub replicas: usize,
    /// Sample mean and variance of the point count N.
    pub count_mean: f64,
    pub count_variance: f64,
}

impl SpectrumEstimate {
    pub fn to_csv(&self) -> String {
        let d = self.window.dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("m{i}")).collect();
        header.extend((1..=d).map(|i| format!("k{i}")));
        header.extend(["k_norm", "mean", "stderr", "replicas"].map(String::from));
        let mut out = format!("{SCHEMA_LINE}\n{}\n", header.join(","));
        for i in 0..self.modes.len() {
            let mut row: Vec<String> = self.modes[i].iter().map(|m| m.to_string()).collect();
            row.extend(self.wavevectors[i].iter().map(|&k| f17(k)));
            let kn = self.wavevectors[i].iter().map(|k| k * k).sum::<f64>().sqrt();
            row.extend([f17(kn), f17(self.mean[i]), f17(self.stderr[i]), self.replicas.to_string()]);
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs `f` on replica seeds 0..replicas in fixed chunks and folds each
/// chunk in order, so the output is independent of the thread count.
pub fn replica_map<T: Send>(replicas: usize, seed: u64, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    let chunks: Vec<Vec<T>> = (0..replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(replicas);
            (lo..hi).map(|r| f(substream_seed(seed, r as u64))).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Monte Carlo estimate of E[(π_d n/N)·S_n(k)] at the given modes. The
/// process is simulated on the torus (wrapped lattices).
pub fn estimate_structure_factor(
    spec: &ProcessSpec,
    w: &Window,
    modes: &[Vec<i64>],
    replicas: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("at least two replicas are needed".into()));
    }
    if modes.is_empty() {
        return Err(Error::InvalidParameter("no wavevectors requested".into()));
    }
    for m in modes {
        if m.len() != w.dim() {
            return Err(Error::DimensionMismatch { expected: w.dim(), got: m.len() });
        }
        if m.iter().all(|&x| x == 0) {
            return Err(Error::ZeroWavevector);
        }
    }
    let volume = w.volume();
    let rows: Vec<Result<(f64, Vec<f64>)>> = replica_map(replicas, seed, |s| {
        let p = sample(spec, w, s)?;
        let n = p.len() as f64;
        let vals = modes
            .iter()
            .map(|m| {
                let v = scattering_intensity(&p, m)?;
                Ok(if n > 0.0 { volume / n * v } else { 0.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((n, vals))
    });
    let mut per_k = vec![Moments::new(); modes.len()];
    let mut counts = Vec::with_capacity(replicas);
    for row in rows {
        let (n, vals) = row?;
        counts.push(n);
        for (acc, v) in per_k.iter_mut().zip(vals) {
            acc.push(v);
        }
    }
    let cm: Moments = counts.iter().copied().collect();
    Ok(SpectrumEstimate {
        window: *w,
        modes: modes.to_vec(),
        wavevectors: modes.iter().map(|m| wavevector(w, m)).collect(),
        mean: per_k.iter().map(|m| m.mean).collect(),
        stderr: per_k.iter().map(|m| m.stderr()).collect(),
        replicas,
        count_mean: cm.mean,
        count_variance: cm.variance(),
    })
}

/// Monte Carlo number variance on a sequence of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCurve {
    pub windows: Vec<Window>,
    pub mean_count: Vec<f64>,
    pub variance: Vec<f64>,
    pub variance_se: Vec<f64>,
    /// σ(n) = Var(N)/|Λ_n|.
    pub sigma: Vec<f64>,
    pub sigma_se: Vec<f64>,
    pub replicas: usize,
}

impl VarianceCurve {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SCHEMA_LINE}\nn,volume,mean_count,var,var_se,sigma,sigma_se,replicas\n");
        for i in 0..self.windows.len() {
            let w = &self.windows[i];
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                f17(w.n()),
                f17(w.volume()),
                f17(self.mean_count[i]),
                f17(self.variance[i]),
                f17(self.variance_se[i]),
                f17(self.sigma[i]),
                f17(self.sigma_se[i]),
                self.replicas
            ));
        }
        out
    }
}

/// Sample variance of N(Λ_n) for each window, using the stationary process
/// restricted to the window.
pub fn variance_curve(spec: &ProcessSpec, windows: &[Window], replicas: usize, seed: u64) -> Result<VarianceCurve> {
    if replicas < 100 {
        return Err(Error::InvalidParameter("variance estimates need at least 100 replicas".into()));
    }
    let mut curve = VarianceCurve {
        windows: windows.to_vec(),
        mean_count: vec![],
        variance: vec![],
        variance_se: vec![],
        sigma: vec![],
        sigma_se: vec![],
        replicas,
    };
    for (wi, w) in windows.iter().enumerate() {
        let counts: Vec<Result<f64>> =
            replica_map(replicas, substream_seed(seed, 1 << 40 | wi as u64), |s| Ok(sample_restricted(spec, w, s)?.len() as f64));
        let counts: Vec<f64> = counts.into_iter().collect::<Result<_>>()?;
        let m: Moments = counts.iter().copied().collect();
        let (var, se) = variance_with_stderr(&counts);
        curve.mean_count.push(m.mean);
        curve.variance.push(var);
        curve.variance_se.push(se);
        curve.sigma.push(var / w.volume());
        curve.sigma_se.push(se / w.volume());
    }
    Ok(curve)
}

/// Empirical distribution of matched distances.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_samples(mut xs: Vec<f64>) -> Self {
        xs.sort_by(f64::total_cmp);
        Self { sorted: xs }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// F̂(r) = #{X ≤ r}/count.
    pub fn eval(&self, r: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= r) as f64 / self.sorted.len() as f64
    }

    /// P̂(X ≥ r).
    pub fn tail(&self, r: f64) -> f64 {
        let below = self.sorted.partition_point(|&x| x < r);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }

    /// Least-squares slope of ln P̂(X ≥ r) against ln r on `points`
    /// log-spaced radii in [r_min, r_max].
    pub fn tail_slope(&self, r_min: f64, r_max: f64, points: usize) -> Option<f64> {
        if !(r_min > 0.0 && r_max > r_min) || points < 2 {
            return None;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..points {
            let r = r_min * (r_max / r_min).powf(i as f64 / (points - 1) as f64);
            let t = self.tail(r);
            if t > 0.0 {
                xs.push(r.ln());
                ys.push(t.ln());
            }
        }
        linear_fit(&xs, &ys).map(|(_, slope)| slope)
    }
}

/// Distances of pairs whose source point lies in the centred sub-window of
/// volume fraction `core_fraction`.
pub fn distance_cdf(m: &MatchResult, source: &PointSet, core_fraction: f64) -> Result<EmpiricalCdf> {
    if m.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(EmpiricalCdf::from_samples(core_distances(m, source, core_fraction)?))
}

/// Raw distances behind [`distance_cdf`], for pooling across replicas.
pub fn core_distances(m: &MatchResult, source: &PointSet, core_fraction: f64) -> Result<Vec<f64>> {
    if !(core_fraction > 0.0 && core_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("core fraction {core_fraction}")));
    }
    let w = source.window();
    let half = 0.5 * w.side() * core_fraction.powf(1.0 / w.dim() as f64);
    let out: Vec<f64> = m
        .pairs
        .iter()
        .zip(&m.distances)
        .filter(|(&(i, _), _)| core_fraction == 1.0 || source.point(i).iter().all(|&x| x.abs() <= half))
        .map(|(_, &d)| d)
        .collect();
    if out.is_empty() {
        return Err(Error::EmptyCore);
    }
    Ok(out)
}
