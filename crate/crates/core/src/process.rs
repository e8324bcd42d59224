//! Seeded samplers for stationary point processes on a [`Window`], and the
//! columnar text format for point sets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::fmt::{f17, parse_f64};
use crate::geometry::Window;
use crate::rng;

/// The processes the laboratory can simulate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec {
    Poisson,
    ShiftedLattice,
    CloakedLattice,
    GaussianLattice { sigma: f64 },
    Ginibre,
}

impl ProcessSpec {
    pub fn validate(&self) -> Result<()> {
        if let ProcessSpec::GaussianLattice { sigma } = *self {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!("gaussian-lattice sigma = {sigma}")));
            }
        }
        Ok(())
    }

    pub fn is_lattice(&self) -> bool {
        matches!(
            self,
            ProcessSpec::ShiftedLattice | ProcessSpec::CloakedLattice | ProcessSpec::GaussianLattice { .. }
        )
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Poisson => f.write_str("poisson"),
            ProcessSpec::ShiftedLattice => f.write_str("shifted-lattice"),
            ProcessSpec::CloakedLattice => f.write_str("cloaked-lattice"),
            ProcessSpec::GaussianLattice { sigma } => write!(f, "gaussian-lattice:{sigma}"),
            ProcessSpec::Ginibre => f.write_str("ginibre"),
        }
    }
}

impl FromStr for ProcessSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s {
            "poisson" => ProcessSpec::Poisson,
            "shifted-lattice" => ProcessSpec::ShiftedLattice,
            "cloaked-lattice" => ProcessSpec::CloakedLattice,
            "ginibre" => ProcessSpec::Ginibre,
            _ => match s.strip_prefix("gaussian-lattice:") {
                Some(v) => ProcessSpec::GaussianLattice {
                    sigma: parse_f64(v).ok_or_else(|| Error::InvalidParameter(format!("sigma `{v}`")))?,
                },
                None => return Err(Error::InvalidParameter(format!("unknown process `{s}`"))),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A finite configuration in a window. Coordinates are stored flat with
/// stride `d` and are canonical: every coordinate lies in (−side/2, side/2].
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    window: Window,
    coords: Vec<f64>,
    /// Generating process; `None` for hand-built or synthetic sets.
    pub process: Option<ProcessSpec>,
    pub seed: u64,
}

impl PointSet {
    /// Builds a point set from canonical coordinates.
    pub fn new(window: Window, coords: Vec<f64>, process: Option<ProcessSpec>, seed: u64) -> Result<Self> {
        let d = window.dim();
        if coords.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, got: coords.len() % d });
        }
        if let Some(bad) = coords.chunks_exact(d).find(|p| !window.contains(p)) {
            return Err(Error::InvalidParameter(format!("point {bad:?} is outside the window")));
        }
        Ok(Self { window, coords, process, seed })
    }

    /// Synthetic set from arbitrary points, wrapped onto the torus.
    pub fn from_points(window: Window, points: &[Vec<f64>]) -> Result<Self> {
        let d = window.dim();
        let mut coords = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.len() });
            }
            coords.extend(p.iter().map(|&x| window.wrap(x)));
        }
        Ok(Self { window, coords, process: None, seed: 0 })
    }

    pub fn empty(window: Window) -> Self {
        Self { window, coords: Vec::new(), process: None, seed: 0 }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.window.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Global toroidal translation by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        let d = self.dim();
        if shift.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: shift.len() });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &x)| self.window.wrap(x + shift[i % d]))
            .collect();
        Ok(Self { coords, ..self.clone() })
    }

    /// Sample rescaled to the unit window Λ_1 (coordinates divided by
    /// n^{1/d}). Point count and order are preserved.
    pub fn rescale_to_unit(&self) -> Self {
        let unit = Window::unit(self.dim()).expect("dimension already validated");
        self.rescaled_into(unit)
    }

    /// Inverse of [`PointSet::rescale_to_unit`]: maps a sample on Λ_1 onto
    /// the window `target` of the same dimension.
    pub fn rescale_from_unit(&self, target: Window) -> Result<Self> {
        if target.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: target.dim() });
        }
        Ok(self.rescaled_into(target))
    }

    fn rescaled_into(&self, target: Window) -> Self {
        let factor = target.side() / self.window.side();
        let coords = self.coords.iter().map(|&x| target.wrap(x * factor)).collect();
        Self { window: target, coords, process: self.process, seed: self.seed }
    }

    /// Smallest toroidal distance between two distinct points (O(N²)).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(self.window.dist2(self.point(i), self.point(j)));
            }
        }
        best.sqrt()
    }

    /// Columnar text form: header `d n process seed count`, then one point
    /// per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        let tag = self.process.map(|p| p.to_string()).unwrap_or_else(|| "synthetic".into());
        let mut out = format!("{} {} {} {} {}\n", self.dim(), f17(self.window.n()), tag, self.seed, self.len());
        for p in self.points() {
            let line: Vec<String> = p.iter().map(|&x| f17(x)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::parse(1, "header must be `d n process seed count`"));
        }
        let d: usize = fields[0].parse().map_err(|_| Error::parse(1, "bad dimension"))?;
        let n = parse_f64(fields[1]).ok_or_else(|| Error::parse(1, "bad n"))?;
        let window = Window::new(d, n).map_err(|e| Error::parse(1, e.to_string()))?;
        let process = match fields[2] {
            "synthetic" => None,
            tag => Some(tag.parse::<ProcessSpec>().map_err(|e| Error::parse(1, e.to_string()))?),
        };
        let seed: u64 = fields[3].parse().map_err(|_| Error::parse(1, "bad seed"))?;
        let count: usize = fields[4].parse().map_err(|_| Error::parse(1, "bad count"))?;
        let mut coords = Vec::with_capacity(count.min(1 << 20) * d);
        for (idx, line) in lines {
            let before = coords.len();
            for tok in line.split_whitespace() {
                coords.push(parse_f64(tok).ok_or_else(|| Error::parse(idx + 1, format!("bad number `{tok}`")))?);
            }
            if coords.len() - before != d {
                return Err(Error::parse(idx + 1, format!("expected {d} coordinates")));
            }
            if !window.contains(&coords[before..]) {
                return Err(Error::parse(idx + 1, "point outside the window"));
            }
        }
        if coords.len() != count * d {
            return Err(Error::parse(0, format!("header announces {count} points, found {}", coords.len() / d)));
        }
        Ok(Self { window, coords, process, seed })
    }
}

/// Draws the periodic (torus) version of the process on `w`. Lattice-based
/// processes are wrapped, which keeps their count exactly side^d.
pub fn sample(spec: &ProcessSpec, w: &Window, seed: u64) -> Result<PointSet> {
    spec.validate()?;
    match *spec {
        ProcessSpec::Poisson => Ok(sample_poisson(w, seed)),
        ProcessSpec::ShiftedLattice => sample_shifted_lattice(w, seed),
        ProcessSpec::CloakedLattice => sample_cloaked_lattice(w, seed),
        ProcessSpec::GaussianLattice { sigma } => sample_gaussian_lattice(w, sigma, seed),
        ProcessSpec::Ginibre => sample_ginibre(w, seed),
    }
}

/// Draws the stationary process of R^d and restricts it to Λ_n without
/// wrapping. Counting statistics (number variance) must use this form: the
/// periodic lattices have a deterministic count on the torus.
pub fn sample_restricted(spec: &ProcessSpec, w: &Window, seed: u64) -> Result<PointSet> {
    spec.validate()?;
    match *spec {
        ProcessSpec::Poisson => Ok(sample_poisson(w, seed)),
        ProcessSpec::Ginibre => sample_ginibre(w, seed),
        ProcessSpec::ShiftedLattice => lattice_restricted(w, seed, *spec, 0.0),
        ProcessSpec::CloakedLattice => lattice_restricted(w, seed, *spec, 1.0),
        ProcessSpec::GaussianLattice { sigma } => lattice_restricted(w, seed, *spec, 8.0 * sigma),
    }
}

/// Homogeneous unit-intensity Poisson process on Λ_n.
pub fn sample_poisson(w: &Window, seed: u64) -> PointSet {
    let mut rng = rng::stream(seed);
    let count = Poisson::new(w.volume()).expect("positive volume").sample(&mut rng) as usize;
    let h = 0.5 * w.side();
    let coords = (0..count * w.dim()).map(|_| h - w.side() * rng.random::<f64>()).collect();
    PointSet { window: *w, coords, process: Some(ProcessSpec::Poisson), seed }
}

fn lattice_side(w: &Window) -> Result<u64> {
    w.integer_side().ok_or(Error::IncompatibleWindow { side: w.side() })
}

/// Per-site displacement rule of the lattice family.
fn displacement(spec: ProcessSpec, rng: &mut rng::Stream, out: &mut [f64]) {
    match spec {
        ProcessSpec::CloakedLattice => out.iter_mut().for_each(|x| *x = rng.random::<f64>()),
        ProcessSpec::GaussianLattice { sigma } => out.iter_mut().for_each(|x| {
            let g: f64 = StandardNormal.sample(rng);
            *x = sigma * g;
        }),
        _ => out.iter_mut().for_each(|x| *x = 0.0),
    }
}

/// Visits the integer sites of the box [lo, hi]^d in lexicographic order.
fn for_each_site(d: usize, lo: i64, hi: i64, mut f: impl FnMut(&[i64])) {
    let mut z = vec![lo; d];
    if hi < lo {
        return;
    }
    loop {
        f(&z);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if z[i] < hi {
                z[i] += 1;
                break;
            }
            z[i] = lo;
        }
    }
}

fn lattice_periodic(w: &Window, seed: u64, spec: ProcessSpec) -> Result<PointSet> {
    let k = lattice_side(w)? as i64;
    let d = w.dim();
    let h = 0.5 * w.side();
    let mut rng = rng::stream(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let mut disp = vec![0.0; d];
    let mut coords = Vec::with_capacity(k.pow(d as u32) as usize * d);
    for_each_site(d, 0, k - 1, |z| {
        displacement(spec, &mut rng, &mut disp);
        for i in 0..d {
            coords.push(w.wrap(-h + z[i] as f64 + shift[i] + disp[i]));
        }
    });
    Ok(PointSet { window: *w, coords, process: Some(spec), seed })
}

fn lattice_restricted(w: &Window, seed: u64, spec: ProcessSpec, reach: f64) -> Result<PointSet> {
    let k = lattice_side(w)? as i64;
    let d = w.dim();
    let h = 0.5 * w.side();
    let margin = reach.ceil() as i64 + 1;
    let mut rng = rng::stream(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let mut disp = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut coords = Vec::new();
    for_each_site(d, -margin, k - 1 + margin, |z| {
        displacement(spec, &mut rng, &mut disp);
        for i in 0..d {
            p[i] = -h + z[i] as f64 + shift[i] + disp[i];
        }
        if w.contains(&p) {
            coords.extend_from_slice(&p);
        }
    });
    Ok(PointSet { window: *w, coords, process: Some(spec), seed })
}

/// Shifted lattice {z + U}. Requires an integer side.
pub fn sample_shifted_lattice(w: &Window, seed: u64) -> Result<PointSet> {
    lattice_periodic(w, seed, ProcessSpec::ShiftedLattice)
}

/// Cloaked lattice {z + U + U_z} with i.i.d. uniform U_z, wrapped.
pub fn sample_cloaked_lattice(w: &Window, seed: u64) -> Result<PointSet> {
    lattice_periodic(w, seed, ProcessSpec::CloakedLattice)
}

/// Gaussian perturbed lattice {z + U + σ G_z}, wrapped.
pub fn sample_gaussian_lattice(w: &Window, sigma: f64, seed: u64) -> Result<PointSet> {
    let spec = ProcessSpec::GaussianLattice { sigma };
    spec.validate()?;
    lattice_periodic(w, seed, spec)
}

/// Matrix size used for a Ginibre sample on `w`: the disk filled by the
/// rescaled eigenvalues has radius 1.2 times the circumradius of Λ_n.
pub fn ginibre_matrix_size(w: &Window) -> usize {
    let circumradius = w.side() * std::f64::consts::SQRT_2 / 2.0;
    (1.44 * PI * circumradius * circumradius).ceil() as usize
}

/// Unit-intensity Ginibre ensemble restricted to Λ_n (d = 2).
///
/// Eigenvalues of an M×M matrix with i.i.d. standard complex Gaussian
/// entries fill the disk of radius √M at intensity 1/π; dividing them by √π
/// gives unit intensity. Points outside Λ_n are dropped.
pub fn sample_ginibre(w: &Window, seed: u64) -> Result<PointSet> {
    if w.dim() != 2 {
        return Err(Error::UnsupportedDimension(w.dim()));
    }
    let m = ginibre_matrix_size(w);
    let mut rng = rng::stream(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = Mat::<c64>::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(s * re, s * im)
    });
    let eig = a
        .eigenvalues()
        .map_err(|_| Error::NonConvergence { iterations: 0, residual: f64::NAN })?;
    let scale = 1.0 / PI.sqrt();
    let mut coords = Vec::with_capacity(2 * m);
    for z in eig {
        let p = [z.re * scale, z.im * scale];
        if w.contains(&p) {
            coords.extend_from_slice(&p);
        }
    }
    Ok(PointSet { window: *w, coords, process: Some(ProcessSpec::Ginibre), seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Moments;

    #[test]
    fn lattice_counts_are_exact() {
        let w = Window::from_side(1, 1.0).unwrap();
        assert_eq!(sample_shifted_lattice(&w, 1).unwrap().len(), 1);
        let w = Window::from_side(2, 8.0).unwrap();
        for seed in 0..20 {
            assert_eq!(sample_shifted_lattice(&w, seed).unwrap().len(), 64);
            assert_eq!(sample_cloaked_lattice(&w, seed).unwrap().len(), 64);
            assert_eq!(sample_gaussian_lattice(&w, 0.3, seed).unwrap().len(), 64);
            assert_eq!(sample_restricted(&ProcessSpec::ShiftedLattice, &w, seed).unwrap().len(), 64);
        }
    }

    #[test]
    fn lattice_needs_integer_side() {
        let w = Window::new(2, 1.0).unwrap();
        assert!(matches!(sample_shifted_lattice(&w, 0), Err(Error::IncompatibleWindow { .. })));
        assert!(matches!(sample_cloaked_lattice(&w, 0), Err(Error::IncompatibleWindow { .. })));
        assert!(matches!(sample_gaussian_lattice(&w, 0.1, 0), Err(Error::IncompatibleWindow { .. })));
    }

    #[test]
    fn zero_sigma_is_shifted_lattice() {
        let w = Window::from_side(3, 4.0).unwrap();
        let a = sample_gaussian_lattice(&w, 0.0, 9).unwrap();
        let b = sample_shifted_lattice(&w, 9).unwrap();
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn cloaked_displacement_is_bounded() {
        for d in 1..=3 {
            let w = Window::from_side(d, 6.0).unwrap();
            for seed in 0..10 {
                let c = sample_cloaked_lattice(&w, seed).unwrap();
                let s = sample_shifted_lattice(&w, seed).unwrap();
                for (p, q) in c.points().zip(s.points()) {
                    assert!(w.dist2(p, q).sqrt() <= (d as f64).sqrt());
                }
            }
        }
    }

    #[test]
    fn gaussian_displacement_mean() {
        // E‖G‖ = √(π/2) for a standard planar Gaussian.
        let sigma = 0.1;
        let w = Window::from_side(2, 16.0).unwrap();
        let mut m = Moments::new();
        for seed in 0..50 {
            let g = sample_gaussian_lattice(&w, sigma, seed).unwrap();
            let s = sample_shifted_lattice(&w, seed).unwrap();
            for (p, q) in g.points().zip(s.points()) {
                m.push(w.dist2(p, q).sqrt());
            }
        }
        let expected = sigma * (PI / 2.0).sqrt();
        assert!((m.mean - expected).abs() < 3.0 * m.stderr(), "{} vs {}", m.mean, expected);
    }

    #[test]
    fn poisson_count_mean_and_variance() {
        let w = Window::new(2, 16.0).unwrap();
        let counts: Vec<f64> = (0..10_000).map(|i| sample_poisson(&w, rng::substream_seed(3, i)).len() as f64).collect();
        let m: Moments = counts.iter().copied().collect();
        let target = (2.0 * PI).powi(2) * 16.0;
        assert!((m.mean - target).abs() < 3.0 * m.stderr());
        let (var, se) = crate::stats::variance_with_stderr(&counts);
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target} ± {se}");
    }

    #[test]
    fn samplers_are_deterministic_and_seed_sensitive() {
        let w = Window::from_side(2, 6.0).unwrap();
        let specs = [
            ProcessSpec::Poisson,
            ProcessSpec::ShiftedLattice,
            ProcessSpec::CloakedLattice,
            ProcessSpec::GaussianLattice { sigma: 0.2 },
            ProcessSpec::Ginibre,
        ];
        for spec in specs {
            for i in 0..100u64 {
                let a = sample(&spec, &w, 2 * i).unwrap();
                assert_eq!(a, sample(&spec, &w, 2 * i).unwrap());
                assert_ne!(a.coords(), sample(&spec, &w, 2 * i + 1).unwrap().coords());
            }
        }
    }

    #[test]
    fn samples_are_simple() {
        let w = Window::from_side(2, 8.0).unwrap();
        for spec in [ProcessSpec::Poisson, ProcessSpec::CloakedLattice, ProcessSpec::Ginibre] {
            let p = sample(&spec, &w, 5).unwrap();
            assert!(p.min_separation() > 1e-12 * w.side());
            assert!(p.points().all(|q| w.contains(q)));
        }
    }

    #[test]
    fn ginibre_requires_plane() {
        let w = Window::new(3, 1.0).unwrap();
        assert!(matches!(sample_ginibre(&w, 0), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn ginibre_mean_count() {
        let w = Window::new(2, 4.0).unwrap();
        let m: Moments = (0..100).map(|i| sample_ginibre(&w, i).unwrap().len() as f64).collect();
        let target = w.volume();
        assert!((m.mean / target - 1.0).abs() < 0.05, "{} vs {target}", m.mean);
    }

    #[test]
    fn rescale_round_trip() {
        let w = Window::new(2, 9.0).unwrap();
        let p = PointSet::from_points(w, &[vec![PI * 3.0 / 2.0, 0.0]]).unwrap();
        let u = p.rescale_to_unit();
        assert!((u.point(0)[0] - PI / 2.0).abs() < 1e-12);
        assert_eq!(u.point(0)[1], 0.0);
        assert!(PointSet::empty(w).rescale_to_unit().is_empty());
        let q = sample_poisson(&w, 4);
        let back = q.rescale_to_unit().rescale_from_unit(w).unwrap();
        for (a, b) in q.points().zip(back.points()) {
            assert!(w.dist2(a, b).sqrt() < 1e-12 * w.side());
        }
    }

    #[test]
    fn text_round_trip() {
        let w = Window::new(2, 3.5).unwrap();
        let p = sample(&ProcessSpec::GaussianLattice { sigma: 0.25 }, &Window::from_side(2, 5.0).unwrap(), 11).unwrap();
        assert_eq!(PointSet::from_text(&p.to_text()).unwrap(), p);
        let q = sample_poisson(&w, 2);
        assert_eq!(PointSet::from_text(&q.to_text()).unwrap(), q);
        let header = q.to_text().lines().next().unwrap().to_string();
        assert!(header.starts_with("2 3.5000000000000000e0 poisson 2 "));
    }

    #[test]
    fn text_rejects_garbage() {
        assert!(PointSet::from_text("").is_err());
        assert!(PointSet::from_text("2 1 poisson 0 1\n0.1\n").is_err());
        assert!(PointSet::from_text("2 1 poisson 0 2\n0.1 0.2\n").is_err());
        assert!(PointSet::from_text("2 1 poisson 0 1\n100 0.2\n").is_err());
        assert!(PointSet::from_text("9 1 poisson 0 0\n").is_err());
        assert!(PointSet::from_text("1 1 bogus 0 0\n").is_err());
    }
}
