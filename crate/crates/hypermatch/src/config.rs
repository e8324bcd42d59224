//! Experiment configuration: a TOML file with top-level run settings and one
//! section named after the experiment, plus `--set key=value` overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hypermatch_core::{CostFn, ProcessSpec, Window};

use crate::error::{HarnessError, HResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Rates,
    Spectrum,
    Variance,
    Tails,
    BlCheck,
    MatchingMoments,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Rates,
        Experiment::Spectrum,
        Experiment::Variance,
        Experiment::Tails,
        Experiment::BlCheck,
        Experiment::MatchingMoments,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Rates => "rates",
            Experiment::Spectrum => "spectrum",
            Experiment::Variance => "variance",
            Experiment::Tails => "tails",
            Experiment::BlCheck => "bl-check",
            Experiment::MatchingMoments => "matching-moments",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Experiment::Rates => "semidiscrete W2 cost to Lebesgue measure against the alpha_2 rates",
            Experiment::Spectrum => "replica mean of the scattering intensity against the structure factor",
            Experiment::Variance => "Monte Carlo number variance against the pair-correlation prediction",
            Experiment::Tails => "dyadic matching distances between two processes and their tail slope",
            Experiment::BlCheck => "Fourier coefficients, measured W2 on the unit torus and the Fourier bounds",
            Experiment::MatchingMoments => "exact, stable and canonical matchings between two processes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

/// Solver used by the rates experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Exact,
    Sinkhorn,
    /// Exact up to `sinkhorn_cutoff` expected points, entropic above, with
    /// both run at the cutoff.
    Auto,
}

/// Parameters of the experiment section. Which fields matter depends on the
/// experiment; unused ones keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub process: Option<String>,
    /// Second process for two-sample experiments (tails, matching-moments).
    #[serde(default)]
    pub target: Option<String>,
    pub d: usize,
    /// Window parameters n (|Λ_n| = (2π)^d n).
    #[serde(default)]
    pub n_grid: Option<Vec<f64>>,
    /// Expected point counts |Λ_n|, converted to n.
    #[serde(default)]
    pub expected_counts: Option<Vec<f64>>,
    /// Window sides, converted to n.
    #[serde(default)]
    pub sides: Option<Vec<f64>>,
    #[serde(default = "default_grid_per_point")]
    pub grid_per_point: usize,
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    #[serde(default = "default_cutoff")]
    pub sinkhorn_cutoff: f64,
    #[serde(default = "default_one")]
    pub c0: f64,
    /// Modes ‖m‖ ≤ t₀; defaults to c₀·n^{1/d}.
    #[serde(default)]
    pub t0: Option<f64>,
    /// Number of wavevectors in spectrum experiments (spread over the ball).
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_cost")]
    pub cost: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_core_fraction")]
    pub core_fraction: f64,
    /// Minimum pooled tail points for the slope fit.
    #[serde(default = "default_min_tail")]
    pub min_tail_points: usize,
    /// Stop after this many completed tasks (simulated interruption).
    #[serde(default)]
    pub stop_after: Option<usize>,
}

fn default_grid_per_point() -> usize {
    4
}
fn default_solver() -> SolverChoice {
    SolverChoice::Exact
}
fn default_cutoff() -> f64 {
    5000.0
}
fn default_one() -> f64 {
    1.0
}
fn default_modes() -> usize {
    20
}
fn default_cost() -> String {
    "power:2".into()
}
fn default_gamma() -> f64 {
    2.0
}
fn default_core_fraction() -> f64 {
    0.25
}
fn default_min_tail() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(flatten)]
    pub sections: toml::Table,
}

fn default_replicas() -> usize {
    200
}
fn default_out() -> PathBuf {
    PathBuf::from("hypermatch-out")
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub replicas: usize,
    pub out: PathBuf,
    pub workers: usize,
    pub params: Params,
}

impl ExperimentConfig {
    /// Parses TOML text and applies `key=value` overrides. Keys without a
    /// dot address run settings (`seed`, `replicas`, `out`, `workers`,
    /// `experiment`) or, failing that, the experiment section.
    pub fn from_toml(text: &str, overrides: &[String]) -> HResult<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.message().to_string()))?;
        let name = raw.experiment.name();
        let mut sections = raw.sections;
        let section = sections
            .remove(name)
            .ok_or_else(|| HarnessError::Config(format!("missing [{name}] section")))?;
        if let Some(other) = sections.keys().next() {
            return Err(HarnessError::Config(format!("unexpected key or section `{other}`")));
        }
        let params: Params = section
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("[{name}]: {}", e.message())))?;
        let cfg = ExperimentConfig {
            experiment: raw.experiment,
            seed: raw.seed,
            replicas: raw.replicas,
            out: raw.out,
            workers: raw.workers,
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> HResult<()> {
        let p = &self.params;
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(1..=hypermatch_core::geometry::MAX_DIM).contains(&p.d) {
            return bad(format!("d = {} is not supported", p.d));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        let grid = self.n_grid()?;
        if grid.is_empty() {
            return bad("the n-grid is empty".into());
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("the n-grid must be strictly ascending".into());
        }
        if p.grid_per_point == 0 {
            return bad("grid_per_point must be positive".into());
        }
        if !(p.core_fraction > 0.0 && p.core_fraction <= 1.0) {
            return bad("core_fraction must lie in (0, 1]".into());
        }
        if !(p.c0 > 0.0) {
            return bad("c0 must be positive".into());
        }
        if !(p.gamma > 1.0) {
            return bad("gamma must exceed 1".into());
        }
        self.cost()?;
        let needs_target = matches!(self.experiment, Experiment::Tails | Experiment::MatchingMoments);
        self.process()?;
        if needs_target {
            self.target()?;
        }
        match self.experiment {
            Experiment::Variance if self.replicas < 100 => bad("variance needs at least 100 replicas".into()),
            Experiment::Spectrum if self.replicas < 2 => bad("spectrum needs at least 2 replicas".into()),
            Experiment::Tails => {
                for w in self.windows()? {
                    let s = w.side();
                    if s.log2().fract() != 0.0 {
                        return bad(format!("tails needs power-of-two sides, got {s}"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn process(&self) -> HResult<ProcessSpec> {
        let s = self.params.process.as_deref().ok_or_else(|| HarnessError::Config("missing `process`".into()))?;
        s.parse().map_err(|e| HarnessError::Config(format!("process: {e}")))
    }

    pub fn target(&self) -> HResult<ProcessSpec> {
        let s = self.params.target.as_deref().ok_or_else(|| HarnessError::Config("missing `target` process".into()))?;
        s.parse().map_err(|e| HarnessError::Config(format!("target: {e}")))
    }

    pub fn cost(&self) -> HResult<CostFn> {
        self.params.cost.parse().map_err(|e| HarnessError::Config(format!("cost: {e}")))
    }

    /// The n-grid, from whichever of `n_grid`, `expected_counts`, `sides`
    /// is given (exactly one).
    pub fn n_grid(&self) -> HResult<Vec<f64>> {
        Ok(self.windows()?.iter().map(|w| w.n()).collect())
    }

    pub fn windows(&self) -> HResult<Vec<Window>> {
        let p = &self.params;
        let given = [p.n_grid.is_some(), p.expected_counts.is_some(), p.sides.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(HarnessError::Config("give exactly one of n_grid, expected_counts, sides".into()));
        }
        let err = |e: hypermatch_core::Error| HarnessError::Config(e.to_string());
        if let Some(ns) = &p.n_grid {
            ns.iter().map(|&n| Window::new(p.d, n).map_err(err)).collect()
        } else if let Some(cs) = &p.expected_counts {
            cs.iter().map(|&c| Window::from_expected_count(p.d, c).map_err(err)).collect()
        } else {
            p.sides.as_ref().unwrap().iter().map(|&s| Window::from_side(p.d, s).map_err(err)).collect()
        }
    }

    /// SHA-256 over the canonical JSON of everything that affects results
    /// (output directory, worker count and interruption are excluded).
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out");
            obj.remove("workers");
            if let Some(p) = obj.get_mut("params").and_then(|p| p.as_object_mut()) {
                p.remove("stop_after");
            }
        }
        let canonical = serde_json::to_string(&v).expect("json");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> HResult<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let value = value.trim();
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    const TOP: [&str; 5] = ["experiment", "seed", "replicas", "out", "workers"];
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => (Some(s.to_string()), f),
        None if TOP.contains(&key) => (None, key),
        None => {
            let exp = table
                .get("experiment")
                .and_then(|v| v.as_str())
                .ok_or_else(|| HarnessError::Config("override needs `experiment` to be set".into()))?;
            (Some(exp.to_string()), key)
        }
    };
    match section {
        None => {
            table.insert(field.to_string(), parsed);
        }
        Some(s) => {
            let entry = table.entry(s.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let t = entry.as_table_mut().ok_or_else(|| HarnessError::Config(format!("`{s}` is not a section")))?;
            t.insert(field.to_string(), parsed);
        }
    }
    Ok(())
}
