//! Matchings and transports under the toroidal metric.
//!
//! * [`exact_matching`]: optimal bijection by shortest augmenting paths.
//! * [`semidiscrete_w2`]: exact min-cost flow from a sample to a uniform
//!   grid, an estimate of the transport cost to Lebesgue measure.
//! * [`sinkhorn_w2`]: entropic approximation of the same quantity.
//! * [`stable_matching`]: iterated mutually nearest pairs.
//! * [`dyadic_matching`]: hierarchical matching over randomly shifted
//!   dyadic cubes.

mod assignment;
mod dyadic;
pub mod netsimplex;
mod semidiscrete;
mod sinkhorn;
mod stable;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fmt::{f17, parse_f64, SCHEMA_LINE};
use crate::process::PointSet;

pub use assignment::{exact_matching, lsap};
pub use dyadic::{dyadic_matching, dyadic_offsets};
pub use semidiscrete::{semidiscrete_w2, SemidiscreteOptions, TransportPlan};
pub use sinkhorn::{sinkhorn_w2, SinkhornOptions, SinkhornResult};
pub use stable::{greedy_pairs, stable_matching};

/// Cost w applied to toroidal distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFn {
    /// w(x) = x^p.
    Power { p: f64 },
    /// w(x) = x^a / (1 + |ln x|^γ), w(0) = 0.
    LogWeighted { a: f64, gamma: f64 },
}

impl CostFn {
    pub fn power(p: f64) -> Result<Self> {
        let c = CostFn::Power { p };
        c.validate()?;
        Ok(c)
    }

    pub fn log_weighted(a: f64, gamma: f64) -> Result<Self> {
        let c = CostFn::LogWeighted { a, gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CostFn::Power { p } => p > 0.0 && p.is_finite(),
            CostFn::LogWeighted { a, gamma } => a > 0.0 && a.is_finite() && gamma > 1.0 && gamma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("cost {self}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            CostFn::Power { p } => {
                if p == 2.0 {
                    x * x
                } else if p == 1.0 {
                    x
                } else {
                    x.powf(p)
                }
            }
            CostFn::LogWeighted { a, gamma } => x.powf(a) / (1.0 + x.ln().abs().powf(gamma)),
        }
    }

    /// x^a/(1+|ln x|^γ) is nondecreasing iff a ≥ max_L γL^{γ−1}/(1+L^γ)
    /// = (γ−1)^{1−1/γ}; powers always are.
    pub fn is_nondecreasing(&self) -> bool {
        match *self {
            CostFn::Power { .. } => true,
            CostFn::LogWeighted { a, gamma } => a >= (gamma - 1.0).powf(1.0 - 1.0 / gamma) * (1.0 - 1e-12),
        }
    }

    /// Whether w is a continuity modulus (nondecreasing, subadditive),
    /// which the Fourier-analytic bounds require.
    pub fn is_modulus(&self) -> bool {
        match *self {
            CostFn::Power { p } => p <= 1.0,
            CostFn::LogWeighted { a, .. } => a <= 1.0 && self.is_nondecreasing(),
        }
    }
}

impl fmt::Display for CostFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFn::Power { p } => write!(f, "power:{p}"),
            CostFn::LogWeighted { a, gamma } => write!(f, "log-weighted:{a}:{gamma}"),
        }
    }
}

impl FromStr for CostFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| parse_f64(t).ok_or_else(|| Error::InvalidParameter(format!("cost `{s}`")));
        match parts.as_slice() {
            ["power", p] => CostFn::power(num(p)?),
            ["log-weighted", a, g] => CostFn::log_weighted(num(a)?, num(g)?),
            _ => Err(Error::InvalidParameter(format!("unknown cost `{s}`"))),
        }
    }
}

/// Level tag of pairs produced by matchers without a hierarchy.
pub const NO_LEVEL: i32 = -1;

/// A partial bijection between a source and a target point set.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub pairs: Vec<(usize, usize)>,
    pub distances: Vec<f64>,
    /// Dyadic level at which each pair was formed, [`NO_LEVEL`] otherwise.
    pub levels: Vec<i32>,
    pub total_cost: f64,
    pub unmatched_source: Vec<usize>,
    pub unmatched_target: Vec<usize>,
}

impl MatchResult {
    /// Assembles a result from pairs, computing distances on `a`'s window.
    pub(crate) fn from_pairs(a: &PointSet, b: &PointSet, pairs: Vec<(usize, usize)>, levels: Vec<i32>, cost: &CostFn) -> Self {
        let w = a.window();
        let distances: Vec<f64> = pairs.iter().map(|&(i, j)| w.dist2(a.point(i), b.point(j)).sqrt()).collect();
        let mut used_a = vec![false; a.len()];
        let mut used_b = vec![false; b.len()];
        for &(i, j) in &pairs {
            used_a[i] = true;
            used_b[j] = true;
        }
        let total_cost = distances.iter().map(|&x| cost.eval(x)).sum();
        Self {
            pairs,
            distances,
            levels,
            total_cost,
            unmatched_source: (0..a.len()).filter(|&i| !used_a[i]).collect(),
            unmatched_target: (0..b.len()).filter(|&j| !used_b[j]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_perfect(&self) -> bool {
        self.unmatched_source.is_empty() && self.unmatched_target.is_empty()
    }

    /// Pairs formed at dyadic levels only (closure pairs removed).
    pub fn without_level_above(&self, max_level: i32) -> MatchResult {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.levels[i] <= max_level).collect();
        MatchResult {
            pairs: keep.iter().map(|&i| self.pairs[i]).collect(),
            distances: keep.iter().map(|&i| self.distances[i]).collect(),
            levels: keep.iter().map(|&i| self.levels[i]).collect(),
            total_cost: f64::NAN,
            unmatched_source: self.unmatched_source.clone(),
            unmatched_target: self.unmatched_target.clone(),
        }
    }

    /// CSV with columns `src_idx,tgt_idx,distance,level`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SCHEMA_LINE}\nsrc_idx,tgt_idx,distance,level\n");
        for ((&(i, j), &d), &l) in self.pairs.iter().zip(&self.distances).zip(&self.levels) {
            out.push_str(&format!("{i},{j},{},{l}\n", f17(d)));
        }
        out
    }

    /// Parses [`MatchResult::to_csv`] output. Unmatched lists are not part of
    /// the format and come back empty; the total is recomputed with `cost`.
    pub fn from_csv(text: &str, cost: &CostFn) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == SCHEMA_LINE => {}
            _ => return Err(Error::parse(1, "missing schema line")),
        }
        match lines.next() {
            Some((_, l)) if l.trim() == "src_idx,tgt_idx,distance,level" => {}
            _ => return Err(Error::parse(2, "missing column header")),
        }
        let mut r = MatchResult {
            pairs: vec![],
            distances: vec![],
            levels: vec![],
            total_cost: 0.0,
            unmatched_source: vec![],
            unmatched_target: vec![],
        };
        let mut seen_src = std::collections::HashSet::new();
        let mut seen_tgt = std::collections::HashSet::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::parse(idx + 1, "expected 4 columns"));
            }
            let i: usize = f[0].parse().map_err(|_| Error::parse(idx + 1, "bad src_idx"))?;
            let j: usize = f[1].parse().map_err(|_| Error::parse(idx + 1, "bad tgt_idx"))?;
            let d = parse_f64(f[2]).filter(|d| *d >= 0.0).ok_or_else(|| Error::parse(idx + 1, "bad distance"))?;
            let l: i32 = f[3].parse().map_err(|_| Error::parse(idx + 1, "bad level"))?;
            if !seen_src.insert(i) || !seen_tgt.insert(j) {
                return Err(Error::parse(idx + 1, "index repeated, not a partial bijection"));
            }
            r.pairs.push((i, j));
            r.distances.push(d);
            r.levels.push(l);
        }
        r.total_cost = cost_of(&r, cost);
        Ok(r)
    }
}

/// Σ w(d_i) over the pairs of a matching.
pub fn cost_of(m: &MatchResult, cost: &CostFn) -> f64 {
    m.distances.iter().map(|&d| cost.eval(d)).sum()
}

pub(crate) fn check_pair(a: &PointSet, b: &PointSet) -> Result<()> {
    if a.window() != b.window() {
        return Err(Error::InvalidParameter("point sets live on different windows".into()));
    }
    Ok(())
}
