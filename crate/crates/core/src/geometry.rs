//! The periodic box Λ_n = (−side/2, side/2]^d with side = 2π n^{1/d}.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// A cubic periodic window. `n` is the volume parameter: the window has
/// volume (2π)^d n and holds (2π)^d n points on average at unit intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    d: usize,
    n: f64,
    side: f64,
}

impl Window {
    pub fn new(d: usize, n: f64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!("volume parameter n = {n}")));
        }
        Ok(Self { d, n, side: 2.0 * PI * n.powf(1.0 / d as f64) })
    }

    /// Window with the given side length.
    pub fn from_side(d: usize, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter(format!("side = {side}")));
        }
        let mut w = Self::new(d, (side / (2.0 * PI)).powi(d as i32))?;
        w.side = side;
        Ok(w)
    }

    /// Window whose volume equals `count`, the expected number of points of a
    /// unit-intensity process.
    pub fn from_expected_count(d: usize, count: f64) -> Result<Self> {
        Self::new(d, count / (2.0 * PI).powi(d as i32))
    }

    /// The unit window Λ_1.
    pub fn unit(d: usize) -> Result<Self> {
        Self::new(d, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.d as i32)
    }

    /// n^{1/d}, the linear scale between Λ_1 and Λ_n.
    pub fn scale(&self) -> f64 {
        self.n.powf(1.0 / self.d as f64)
    }

    /// `Some(k)` when the side is (numerically) the integer `k`.
    pub fn integer_side(&self) -> Option<u64> {
        let r = self.side.round();
        if r >= 1.0 && (self.side - r).abs() <= 1e-9 * self.side.max(1.0) {
            Some(r as u64)
        } else {
            None
        }
    }

    /// Reduces a coordinate into (−side/2, side/2].
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        let y = x - self.side * (x / self.side - 0.5).ceil();
        // Guard the rounding edge where y lands exactly on −side/2.
        if y <= -0.5 * self.side {
            y + self.side
        } else {
            y
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let h = 0.5 * self.side;
        p.iter().all(|&x| x > -h && x <= h)
    }

    /// Per-axis minimum-image separation.
    #[inline]
    pub fn axis_gap(&self, a: f64, b: f64) -> f64 {
        let t = (a - b).abs();
        let t = if t < self.side { t } else { t % self.side };
        t.min(self.side - t)
    }

    /// Squared toroidal distance without dimension checks.
    #[inline]
    pub fn dist2(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(&x, &y)| self.axis_gap(x, y).powi(2)).sum()
    }

    /// Toroidal distance d_Λ(a, b).
    pub fn toroidal_distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        for p in [a, b] {
            if p.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: p.len() });
            }
        }
        Ok(self.dist2(a, b).sqrt())
    }

    /// δ_n(x) = |Λ_n ∩ (Λ_n + x)| = Π (side − |x_i|)_+.
    pub fn delta_n(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| (self.side - xi.abs()).max(0.0)).product()
    }

    /// γ_n(x) = |Λ_n ∩ (Λ_n + x)^c|, evaluated with the telescoping sum
    /// Σ_j side^{j−1} |x_j| Π_{k>j} (side − |x_k|)_+, which avoids the
    /// cancellation of side^d − δ_n(x) for small x.
    pub fn gamma_n(&self, x: &[f64]) -> f64 {
        let s = self.side;
        if x.iter().any(|xi| xi.abs() >= s) {
            return self.volume();
        }
        let d = x.len();
        let mut total = 0.0;
        let mut prefix = 1.0;
        for j in 0..d {
            let tail: f64 = x[j + 1..].iter().map(|&xk| (s - xk.abs()).max(0.0)).product();
            total += prefix * x[j].abs() * tail;
            prefix *= s;
        }
        total
    }
}
