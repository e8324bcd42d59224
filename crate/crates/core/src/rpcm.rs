//! Analytic reduced pair correlation measures β and the quantities derived
//! from them: total mass, tail function ε, b_n, structure factor and the
//! exact number variance on Λ_n.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fmt::parse_f64;
use crate::geometry::{Window, MAX_DIM};
use crate::process::ProcessSpec;
use crate::quad::Quadrature;

/// Radius beyond which the unit Ginibre kernel e^{−π r²} is below 1e−21.
const GINIBRE_CUTOFF: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum RpcmKind {
    Poisson,
    /// Unit-intensity Ginibre ensemble: β(x) = −e^{−π|x|²} (d = 2).
    GinibreUnit,
    /// Cloaked lattice z + U + U_z: β(x) = −Π (1 − |x_i|)_+.
    CloakedLattice,
    /// Radial density sampled at increasing radii, linearly interpolated,
    /// zero beyond the last radius.
    Table { r: Vec<f64>, density: Vec<f64>, integrable: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcmModel {
    pub kind: RpcmKind,
    d: usize,
}

/// Surface area of the unit sphere in R^d.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!("dimension validated"),
    }
}

/// Bessel function of the first kind, J_n(x) = (1/π)∫_0^π cos(nτ − x sin τ)dτ.
fn bessel_j(order: u32, x: f64) -> Result<f64> {
    let q = Quadrature::new(1e-14, 1e-12);
    let panels = ((x.abs() / PI).ceil() as usize).max(1);
    let breaks: Vec<f64> = (1..panels).map(|i| PI * i as f64 / panels as f64).collect();
    Ok(q.integrate(|t| (order as f64 * t - x * t.sin()).cos(), 0.0, PI, &breaks)? / PI)
}

impl RpcmModel {
    pub fn new(kind: RpcmKind, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        match &kind {
            RpcmKind::GinibreUnit if d != 2 => return Err(Error::UnsupportedDimension(d)),
            RpcmKind::Table { r, density, .. } => {
                if r.is_empty() || r.len() != density.len() {
                    return Err(Error::InvalidParameter("table needs matching, nonempty columns".into()));
                }
                if r[0] < 0.0 || r.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidParameter("table radii must be nonnegative and increasing".into()));
                }
                if r.iter().chain(density).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("table entries must be finite".into()));
                }
            }
            _ => {}
        }
        Ok(Self { kind, d })
    }

    pub fn poisson(d: usize) -> Result<Self> {
        Self::new(RpcmKind::Poisson, d)
    }

    pub fn ginibre_unit() -> Self {
        Self { kind: RpcmKind::GinibreUnit, d: 2 }
    }

    pub fn cloaked_lattice(d: usize) -> Result<Self> {
        Self::new(RpcmKind::CloakedLattice, d)
    }

    /// Model of a simulated process, when it has an absolutely continuous β.
    pub fn for_process(spec: &ProcessSpec, d: usize) -> Option<Self> {
        match spec {
            ProcessSpec::Poisson => Self::poisson(d).ok(),
            ProcessSpec::CloakedLattice => Self::cloaked_lattice(d).ok(),
            ProcessSpec::Ginibre if d == 2 => Some(Self::ginibre_unit()),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RpcmKind::Poisson => "poisson",
            RpcmKind::GinibreUnit => "ginibre-unit",
            RpcmKind::CloakedLattice => "cloaked-lattice",
            RpcmKind::Table { .. } => "table",
        }
    }

    pub fn is_integrable(&self) -> bool {
        !matches!(self.kind, RpcmKind::Table { integrable: false, .. })
    }

    fn require_integrable(&self) -> Result<()> {
        if self.is_integrable() {
            Ok(())
        } else {
            Err(Error::NonIntegrableModel)
        }
    }

    fn radial_density(&self, r: f64) -> f64 {
        match &self.kind {
            RpcmKind::Poisson => 0.0,
            RpcmKind::GinibreUnit => -(-PI * r * r).exp(),
            RpcmKind::Table { r: rs, density, .. } => {
                let last = rs.len() - 1;
                if r > rs[last] {
                    0.0
                } else if r <= rs[0] {
                    density[0]
                } else {
                    let j = rs.partition_point(|&x| x < r);
                    let t = (r - rs[j - 1]) / (rs[j] - rs[j - 1]);
                    density[j - 1] + t * (density[j] - density[j - 1])
                }
            }
            RpcmKind::CloakedLattice => unreachable!("not radial"),
        }
    }

    /// Density of β at `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self.kind {
            RpcmKind::CloakedLattice => -x.iter().map(|&t| (1.0 - t.abs()).max(0.0)).product::<f64>(),
            _ => self.radial_density(x.iter().map(|t| t * t).sum::<f64>().sqrt()),
        }
    }

    /// Radius of a ball outside which |β| is negligible (or zero).
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            RpcmKind::Poisson => 0.0,
            RpcmKind::GinibreUnit => GINIBRE_CUTOFF,
            RpcmKind::CloakedLattice => (self.d as f64).sqrt(),
            RpcmKind::Table { r, .. } => *r.last().expect("nonempty"),
        }
    }

    fn knots(&self) -> Vec<f64> {
        match &self.kind {
            RpcmKind::Table { r, .. } => r.clone(),
            _ => Vec::new(),
        }
    }

    /// ∫_{R^d} g(|x|) β(dx) for radial models.
    fn radial_integral(&self, g: impl Fn(f64) -> f64, extra_breaks: &[f64]) -> Result<f64> {
        let mut breaks = self.knots();
        breaks.extend_from_slice(extra_breaks);
        let d = self.d as i32;
        let v = Quadrature::default().integrate(
            |r| r.powi(d - 1) * g(r) * self.radial_density(r),
            0.0,
            self.support_radius(),
            &breaks,
        )?;
        Ok(sphere_area(self.d) * v)
    }

    /// ∫ g(x) β(dx) for integrands g even in every coordinate, evaluated
    /// as 2^d times the integral over the positive orthant box [0, a]^d.
    fn orthant_integral(&self, g: &dyn Fn(&[f64]) -> f64, a: f64, inner_breaks: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
        let lo = vec![0.0; self.d];
        let hi = vec![a; self.d];
        let q = Quadrature::new(1e-12, 1e-9);
        let f = |x: &[f64]| g(x) * self.density(x);
        Ok(2f64.powi(self.d as i32) * q.integrate_box(&f, &lo, &hi, inner_breaks)?)
    }

    /// β(R^d).
    pub fn beta_total(&self) -> Result<f64> {
        self.require_integrable()?;
        let v = match self.kind {
            RpcmKind::Poisson => 0.0,
            RpcmKind::CloakedLattice => self.orthant_integral(&|_| 1.0, 1.0, &|_| vec![])?,
            _ => self.radial_integral(|_| 1.0, &[])?,
        };
        if matches!(self.kind, RpcmKind::GinibreUnit | RpcmKind::CloakedLattice) {
            assert!((v + 1.0).abs() < 1e-6, "β(R^d) = {v}");
        }
        Ok(v)
    }

    /// ε(t) = ∫ min(1, t|x|) |β|(dx).
    pub fn epsilon(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon needs t > 0, got {t}")));
        }
        match self.kind {
            RpcmKind::Poisson => Ok(0.0),
            RpcmKind::CloakedLattice => {
                let g = |x: &[f64]| (t * x.iter().map(|v| v * v).sum::<f64>().sqrt()).min(1.0);
                let v = self.orthant_integral(&g, 1.0, &|outer| sphere_crossing(outer, 1.0 / t))?;
                Ok(-v)
            }
            _ => {
                // |β| of a table is integrated through |density|.
                let d = self.d as i32;
                let mut breaks = self.knots();
                breaks.push(1.0 / t);
                let v = Quadrature::default().integrate(
                    |r| r.powi(d - 1) * (t * r).min(1.0) * self.radial_density(r).abs(),
                    0.0,
                    self.support_radius(),
                    &breaks,
                )?;
                Ok(sphere_area(self.d) * v)
            }
        }
    }

    /// |β|(R^d).
    pub fn abs_total(&self) -> Result<f64> {
        self.abs_mass_in_box(f64::INFINITY)
    }

    /// |β|([−a, a]^d).
    fn abs_mass_in_box(&self, a: f64) -> Result<f64> {
        match &self.kind {
            RpcmKind::Poisson => Ok(0.0),
            RpcmKind::CloakedLattice => {
                // Product of one-dimensional tent masses ∫_{−a}^{a}(1−|t|)_+.
                let b = a.min(1.0);
                Ok((2.0 * b - b * b).powi(self.d as i32))
            }
            _ => {
                let r = self.support_radius();
                if a >= r {
                    let d = self.d as i32;
                    let v = Quadrature::default().integrate(
                        |s| s.powi(d - 1) * self.radial_density(s).abs(),
                        0.0,
                        r,
                        &self.knots(),
                    )?;
                    return Ok(sphere_area(self.d) * v);
                }
                let lo = vec![0.0; self.d];
                let hi = vec![a; self.d];
                let f = |x: &[f64]| self.density(x).abs();
                let knots = self.knots();
                let breaks = |outer: &[f64]| knots.iter().flat_map(|&k| sphere_crossing(outer, k)).collect();
                let v = Quadrature::new(1e-12, 1e-9).integrate_box(&f, &lo, &hi, &breaks)?;
                Ok(2f64.powi(self.d as i32) * v)
            }
        }
    }

    /// b_n = 1 + |β|(Λ_n + Λ_n) = 1 + |β|(Λ_{2^d n}).
    pub fn b_n(&self, n: f64) -> Result<f64> {
        let w = Window::new(self.d, n)?;
        Ok(1.0 + self.abs_mass_in_box(w.side())?)
    }

    /// S(k) = 1 + ∫ e^{−ik·x} β(dx).
    pub fn structure_factor(&self, k: &[f64]) -> Result<f64> {
        self.require_integrable()?;
        if k.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: k.len() });
        }
        let k2: f64 = k.iter().map(|v| v * v).sum();
        Ok(match self.kind {
            RpcmKind::Poisson => 1.0,
            RpcmKind::GinibreUnit => -(-k2 / (4.0 * PI)).exp_m1(),
            RpcmKind::CloakedLattice => {
                1.0 - k.iter().map(|&ki| tent_transform(ki)).product::<f64>()
            }
            RpcmKind::Table { .. } => {
                let kn = k2.sqrt();
                let kernel = |r: f64| -> f64 {
                    let x = kn * r;
                    match self.d {
                        1 => x.cos(),
                        2 => bessel_j(0, x).unwrap_or(f64::NAN),
                        3 => if x == 0.0 { 1.0 } else { x.sin() / x },
                        _ => if x == 0.0 { 1.0 } else { 2.0 * bessel_j(1, x).unwrap_or(f64::NAN) / x },
                    }
                };
                let v = self.radial_integral(kernel, &[])?;
                if !v.is_finite() {
                    return Err(Error::QuadratureFailure { estimate: v, error: f64::NAN });
                }
                1.0 + v
            }
        })
    }

    /// ∫ 1[|x| > 1] ln|x| |β|(dx).
    pub fn log_integral(&self) -> Result<f64> {
        match self.kind {
            RpcmKind::Poisson => Ok(0.0),
            RpcmKind::CloakedLattice => {
                let g = |x: &[f64]| {
                    let r2: f64 = x.iter().map(|v| v * v).sum();
                    if r2 > 1.0 { 0.5 * r2.ln() } else { 0.0 }
                };
                Ok(-self.orthant_integral(&g, 1.0, &|outer| sphere_crossing(outer, 1.0))?)
            }
            _ => {
                let r = self.support_radius();
                if r <= 1.0 {
                    return Ok(0.0);
                }
                let d = self.d as i32;
                let v = Quadrature::default().integrate(
                    |s| s.powi(d - 1) * s.ln() * self.radial_density(s).abs(),
                    1.0,
                    r,
                    &self.knots(),
                )?;
                Ok(sphere_area(self.d) * v)
            }
        }
    }

    /// Var N(Λ_n) = π_d n (1 + β(R^d)) − ∫ γ_n(z) β(dz), with π_d n the
    /// volume of Λ_n.
    pub fn predicted_variance(&self, n: f64) -> Result<f64> {
        self.require_integrable()?;
        let w = Window::new(self.d, n)?;
        if let RpcmKind::Poisson = self.kind {
            return Ok(w.volume());
        }
        let total = self.beta_total()?;
        let side = w.side();
        let reach = match self.kind {
            RpcmKind::CloakedLattice => 1.0,
            _ => self.support_radius(),
        };
        let g = |z: &[f64]| w.gamma_n(z);
        let breaks = |_: &[f64]| vec![side];
        let overlap = self.orthant_integral(&g, reach, &breaks)?;
        Ok(w.volume() * (1.0 + total) - overlap)
    }

    /// Exact E|Σ_{x ∈ Λ_n} e^{−ik·x}|² / |Λ_n| at an allowed wavevector of
    /// Λ_n: 1 + |Λ_n|^{−1} ∫ cos(k·z) δ_n(z) β(dz). Converges to S(k) as n
    /// grows.
    pub fn windowed_structure_factor(&self, k: &[f64], n: f64) -> Result<f64> {
        self.require_integrable()?;
        if k.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: k.len() });
        }
        let w = Window::new(self.d, n)?;
        if let RpcmKind::Poisson = self.kind {
            return Ok(1.0);
        }
        let reach = match self.kind {
            RpcmKind::CloakedLattice => 1.0,
            _ => self.support_radius(),
        }
        .min(w.side());
        // The model is even in each coordinate, so cos(k·z) reduces to the
        // product of cos(k_i z_i) on the orthant.
        let g = |z: &[f64]| z.iter().zip(k).map(|(zi, ki)| (zi * ki).cos()).product::<f64>() * w.delta_n(z);
        let v = self.orthant_integral(&g, reach, &|_| vec![])?;
        Ok(1.0 + v / w.volume())
    }

    /// Reads the two-column table format. The first non-comment line is
    /// `rpcm-table d=<d> sign=<as-is|negated> integrable=<true|false>`;
    /// each following line holds `r density`. Lines starting with `#` are
    /// comments.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = rows.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("rpcm-table") {
            return Err(Error::parse(hline, "header must start with `rpcm-table`"));
        }
        let (mut d, mut negate, mut integrable) = (None, None, None);
        for f in fields {
            let (key, value) = f.split_once('=').ok_or_else(|| Error::parse(hline, format!("bad field `{f}`")))?;
            match key {
                "d" => d = Some(value.parse::<usize>().map_err(|_| Error::parse(hline, "bad d"))?),
                "sign" => {
                    negate = Some(match value {
                        "as-is" => false,
                        "negated" => true,
                        _ => return Err(Error::parse(hline, "sign must be as-is or negated")),
                    })
                }
                "integrable" => {
                    integrable = Some(value.parse::<bool>().map_err(|_| Error::parse(hline, "bad integrable flag"))?)
                }
                _ => return Err(Error::parse(hline, format!("unknown key `{key}`"))),
            }
        }
        let d = d.ok_or_else(|| Error::parse(hline, "missing d"))?;
        let negate = negate.ok_or_else(|| Error::parse(hline, "missing sign"))?;
        let integrable = integrable.ok_or_else(|| Error::parse(hline, "missing integrable"))?;
        let (mut r, mut density) = (Vec::new(), Vec::new());
        for (line, row) in rows {
            let cols: Vec<&str> = row.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(Error::parse(line, "expected `r density`"));
            }
            let a = parse_f64(cols[0]).ok_or_else(|| Error::parse(line, "bad radius"))?;
            let b = parse_f64(cols[1]).ok_or_else(|| Error::parse(line, "bad density"))?;
            r.push(a);
            density.push(if negate { -b } else { b });
        }
        Self::new(RpcmKind::Table { r, density, integrable }, d).map_err(|e| Error::parse(0, e.to_string()))
    }
}

/// ∫_{−∞}^{∞} (1 − |t|)_+ e^{−ikt} dt = 2(1 − cos k)/k².
fn tent_transform(k: f64) -> f64 {
    if k.abs() < 1e-4 {
        1.0 - k * k / 12.0
    } else {
        let s = (0.5 * k).sin() / (0.5 * k);
        s * s
    }
}

/// Value of the last coordinate at which |x| crosses `radius`, given the
/// outer coordinates.
fn sphere_crossing(outer: &[f64], radius: f64) -> Vec<f64> {
    let rest = radius * radius - outer.iter().map(|v| v * v).sum::<f64>();
    if rest > 0.0 {
        vec![rest.sqrt()]
    } else {
        Vec::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn beta_totals() {
        assert_eq!(RpcmModel::poisson(2).unwrap().beta_total().unwrap(), 0.0);
        assert!(close(RpcmModel::ginibre_unit().beta_total().unwrap(), -1.0, 1e-9));
        for d in 1..=3 {
            assert!(close(RpcmModel::cloaked_lattice(d).unwrap().beta_total().unwrap(), -1.0, 1e-8));
        }
    }

    #[test]
    fn ginibre_only_in_plane() {
        assert!(RpcmModel::new(RpcmKind::GinibreUnit, 3).is_err());
        assert!(RpcmModel::new(RpcmKind::Poisson, 5).is_err());
    }

    #[test]
    fn ginibre_epsilon_limits() {
        let m = RpcmModel::ginibre_unit();
        let t = 1e-4;
        assert!(close(m.epsilon(t).unwrap() / t, 0.5, 1e-6));
        assert!(close(m.epsilon(1e6).unwrap(), 1.0, 1e-5));
        assert_eq!(RpcmModel::poisson(1).unwrap().epsilon(3.0).unwrap(), 0.0);
        assert!(m.epsilon(0.0).is_err());
    }

    #[test]
    fn epsilon_monotone_and_bounded() {
        for m in [RpcmModel::ginibre_unit(), RpcmModel::cloaked_lattice(2).unwrap()] {
            let abs = m.abs_total().unwrap();
            let first = m.radial_or_box_first_moment();
            let mut prev = 0.0;
            for i in 0..30 {
                let t = 10f64.powf(-3.0 + 0.2 * i as f64);
                let e = m.epsilon(t).unwrap();
                assert!(e >= prev - 1e-12);
                assert!(e <= abs.min(t * first) * (1.0 + 1e-8));
                prev = e;
            }
        }
    }

    impl RpcmModel {
        /// ∫|x||β| by an independent route: Monte Carlo-free midpoint sums.
        fn radial_or_box_first_moment(&self) -> f64 {
            let h = 2e-3;
            let m = (2.0 * self.support_radius() / h).ceil() as i64;
            let mut s = 0.0;
            for i in -m..m {
                for j in -m..m {
                    let x = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                    s += (x[0] * x[0] + x[1] * x[1]).sqrt() * self.density(&x).abs();
                }
            }
            s * h * h
        }
    }

    #[test]
    fn b_n_values() {
        assert_eq!(RpcmModel::poisson(2).unwrap().b_n(3.0).unwrap(), 1.0);
        assert!(close(RpcmModel::ginibre_unit().b_n(100.0).unwrap(), 2.0, 1e-6));
        for d in 1..=3 {
            assert!(close(RpcmModel::cloaked_lattice(d).unwrap().b_n(1.0).unwrap(), 2.0, 1e-12));
        }
        // Tiny window: |β|([−a,a]²) = erf(a√π)² for Ginibre.
        let m = RpcmModel::ginibre_unit();
        let n = 1e-3;
        let a = Window::new(2, n).unwrap().side();
        let expected = erf(a * PI.sqrt()).powi(2);
        assert!(close(m.b_n(n).unwrap() - 1.0, expected, 1e-7));
    }

    /// Abramowitz–Stegun style series; enough for small arguments.
    fn erf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for k in 1..60 {
            term *= -x * x / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn structure_factors() {
        let m = RpcmModel::ginibre_unit();
        assert_eq!(m.structure_factor(&[0.0, 0.0]).unwrap(), 0.0);
        for &k in &[0.1, 1.0, 2.0, 5.0] {
            let s = m.structure_factor(&[k, 0.0]).unwrap();
            assert!(close(s, 1.0 - (-k * k / (4.0 * PI)).exp(), 1e-14));
            assert!(s >= 0.0);
        }
        assert_eq!(RpcmModel::poisson(3).unwrap().structure_factor(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        // Cloaked closed form against brute quadrature of the Fourier integral.
        let c = RpcmModel::cloaked_lattice(2).unwrap();
        let k = [0.7, -1.9];
        let q = Quadrature::new(1e-12, 1e-10);
        let brute = q
            .integrate_box(&|x| (k[0] * x[0] + k[1] * x[1]).cos() * c.density(x), &[-1.0, -1.0], &[1.0, 1.0], &|_| vec![0.0])
            .unwrap();
        assert!(close(c.structure_factor(&k).unwrap(), 1.0 + brute, 1e-9));
        assert!(close(c.structure_factor(&[0.0, 0.0]).unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn table_reproduces_ginibre() {
        let r: Vec<f64> = (0..=4000).map(|i| i as f64 * 1e-3).collect();
        let density: Vec<f64> = r.iter().map(|&x| (-PI * x * x).exp()).collect();
        let mut text = String::from("# sampled\nrpcm-table d=2 sign=negated integrable=true\n");
        for (a, b) in r.iter().zip(&density) {
            text.push_str(&format!("{a} {b}\n"));
        }
        let t = RpcmModel::parse_table(&text).unwrap();
        let g = RpcmModel::ginibre_unit();
        assert!(close(t.beta_total().unwrap(), -1.0, 1e-6));
        for &k in &[0.5, 2.0, 4.0] {
            let a = t.structure_factor(&[k, 0.0]).unwrap();
            let b = g.structure_factor(&[0.0, k]).unwrap();
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert!(close(t.epsilon(0.3).unwrap(), g.epsilon(0.3).unwrap(), 1e-6));
    }

    #[test]
    fn radial_kernels_in_all_dimensions() {
        // β = −e^{−π|x|²}·c_d with c_d so that β(R^d) = −1; S = 1 − e^{−|k|²/4π}.
        for d in 1..=4 {
            let r: Vec<f64> = (0..=5000).map(|i| i as f64 * 1e-3).collect();
            let density: Vec<f64> = r.iter().map(|&x| -(-PI * x * x).exp()).collect();
            let m = RpcmModel::new(RpcmKind::Table { r, density, integrable: true }, d).unwrap();
            let mut k = vec![0.0; d];
            k[0] = 1.5;
            let expected = 1.0 - (-1.5f64 * 1.5 / (4.0 * PI)).exp();
            // Linear interpolation of the table limits the accuracy.
            assert!((m.structure_factor(&k).unwrap() - expected).abs() < 1e-5, "d={d}");
        }
    }

    #[test]
    fn non_integrable_table_is_refused() {
        let m = RpcmModel::parse_table("rpcm-table d=1 sign=as-is integrable=false\n0 1\n1 0\n").unwrap();
        assert_eq!(m.beta_total(), Err(Error::NonIntegrableModel));
        assert_eq!(m.structure_factor(&[1.0]), Err(Error::NonIntegrableModel));
        assert_eq!(m.predicted_variance(2.0), Err(Error::NonIntegrableModel));
        assert!(m.epsilon(1.0).unwrap() > 0.0);
    }

    #[test]
    fn table_parse_errors() {
        for bad in [
            "",
            "table d=1 sign=as-is integrable=true\n0 1\n",
            "rpcm-table d=1 sign=maybe integrable=true\n0 1\n",
            "rpcm-table d=1 sign=as-is\n0 1\n",
            "rpcm-table d=1 sign=as-is integrable=true\n",
            "rpcm-table d=1 sign=as-is integrable=true\n1 1\n0 2\n",
            "rpcm-table d=1 sign=as-is integrable=true\n0 nan\n",
            "rpcm-table d=7 sign=as-is integrable=true\n0 1\n",
        ] {
            assert!(RpcmModel::parse_table(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn log_integrals() {
        assert_eq!(RpcmModel::poisson(2).unwrap().log_integral().unwrap(), 0.0);
        let g = RpcmModel::ginibre_unit().log_integral().unwrap();
        assert!(g > 0.0 && g < 0.1);
        // Brute midpoint oracle for the cloaked lattice.
        let c = RpcmModel::cloaked_lattice(2).unwrap();
        let h = 1e-3;
        let mut s = 0.0;
        for i in 0..1000 {
            for j in 0..1000 {
                let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                let r = (x * x + y * y).sqrt();
                if r > 1.0 {
                    s += r.ln() * (1.0 - x) * (1.0 - y);
                }
            }
        }
        let oracle = 4.0 * s * h * h;
        assert!((c.log_integral().unwrap() - oracle).abs() < 1e-5, "{} vs {oracle}", c.log_integral().unwrap());
    }

    #[test]
    fn predicted_variance_poisson_exact() {
        for d in 1..=3 {
            let w = Window::new(d, 5.0).unwrap();
            assert_eq!(RpcmModel::poisson(d).unwrap().predicted_variance(5.0).unwrap(), w.volume());
        }
    }

    #[test]
    fn predicted_variance_matches_delta_route() {
        // Var = |Λ_n| + ∫ δ_n β, an independent expression of the same identity.
        let q = Quadrature::new(1e-12, 1e-10);
        for (m, n) in [(RpcmModel::ginibre_unit(), 3.0), (RpcmModel::cloaked_lattice(2).unwrap(), 0.2)] {
            let w = Window::new(2, n).unwrap();
            let a = w.side().min(m.support_radius());
            let f = |x: &[f64]| w.delta_n(x) * m.density(x);
            let v = w.volume() + q.integrate_box(&f, &[-a, -a], &[a, a], &|_| vec![0.0]).unwrap();
            let p = m.predicted_variance(n).unwrap();
            assert!(close(p, v, 1e-7), "{p} vs {v}");
        }
    }

    #[test]
    fn ginibre_reduced_variance_vanishes() {
        let m = RpcmModel::ginibre_unit();
        let mut prev = f64::INFINITY;
        for &n in &[1.0, 4.0, 16.0, 64.0, 256.0] {
            let w = Window::new(2, n).unwrap();
            let sigma = m.predicted_variance(n).unwrap() / w.volume();
            assert!(sigma > 0.0 && sigma < prev);
            prev = sigma;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn variance_between_lemma_bounds() {
        // Upper: Var ≤ c n b_n. Lower (β ≤ 0): Var ≥ c′ |Λ_n| ε(n^{−1/d}).
        let m = RpcmModel::ginibre_unit();
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for &n in &[1.0, 4.0, 16.0, 64.0, 256.0, 1024.0] {
            let w = Window::new(2, n).unwrap();
            let v = m.predicted_variance(n).unwrap();
            assert!(v >= 0.0);
            upper.push(v / (n * m.b_n(n).unwrap()));
            let total = m.beta_total().unwrap();
            lower.push(v / (w.volume() * (1.0 + total + m.epsilon(1.0 / w.scale()).unwrap())));
        }
        let (umin, umax) = upper.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        let (lmin, lmax) = lower.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(umax < 20.0 && umin > 0.0);
        assert!(lmin > 0.0 && lmax / lmin < 4.0, "{lower:?}");
    }

    #[test]
    fn windowed_structure_factor_converges() {
        let m = RpcmModel::ginibre_unit();
        let n = 64.0;
        let w = Window::new(2, n).unwrap();
        let k = [2.0 * PI / w.side() * 5.0, 0.0];
        let a = m.windowed_structure_factor(&k, n).unwrap();
        let b = m.structure_factor(&k).unwrap();
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
        assert_eq!(RpcmModel::poisson(2).unwrap().windowed_structure_factor(&k, n).unwrap(), 1.0);
    }
}
