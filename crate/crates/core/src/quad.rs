//! Adaptive Gauss–Kronrod quadrature, nested box integration and the
//! logarithmic-grid Simpson rule used by the rate integrals.

use std::cell::RefCell;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Global adaptive quadrature settings.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-10, max_panels: 2000 }
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    /// Integrates `f` over `[a, b]`, splitting first at the given interior
    /// breakpoints (kinks or jumps of the integrand).
    pub fn integrate(
        &self,
        mut f: impl FnMut(f64) -> f64,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut nodes = Vec::with_capacity(cuts.len() + 2);
        nodes.push(lo);
        nodes.extend(cuts);
        nodes.push(hi);

        let mut heap = BinaryHeap::new();
        let (mut total, mut err) = (0.0, 0.0);
        for w in nodes.windows(2) {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            total += v;
            err += e;
            heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
        }
        while err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if heap.len() >= self.max_panels {
                return Err(Error::QuadratureFailure { estimate: total, error: err });
            }
            let worst = heap.pop().expect("nonempty heap");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                // Panel can no longer be split in floating point.
                return Err(Error::QuadratureFailure { estimate: total, error: err });
            }
            let (v1, e1) = gk15(&mut f, worst.a, mid);
            let (v2, e2) = gk15(&mut f, mid, worst.b);
            total += v1 + v2 - worst.value;
            err += e1 + e2 - worst.error;
            heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
            heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        }
        // Re-sum to shed accumulated cancellation in the running total.
        let total: f64 = heap.iter().map(|p| p.value).sum();
        Ok(sign * total)
    }

    /// Iterated integral of `f` over the box `[lo, hi]`. `inner_breaks`
    /// supplies breakpoints of the innermost variable given the outer ones.
    pub fn integrate_box(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        lo: &[f64],
        hi: &[f64],
        inner_breaks: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<f64> {
        assert_eq!(lo.len(), hi.len());
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let mut x = vec![0.0; lo.len()];
        let v = self.nested(f, lo, hi, inner_breaks, 0, &mut x, &failure);
        match failure.into_inner() {
            Some(e) => Err(e),
            None => v,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn nested(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        lo: &[f64],
        hi: &[f64],
        inner_breaks: &dyn Fn(&[f64]) -> Vec<f64>,
        level: usize,
        x: &mut Vec<f64>,
        failure: &RefCell<Option<Error>>,
    ) -> Result<f64> {
        let d = lo.len();
        if level + 1 == d {
            let breaks = inner_breaks(&x[..level]);
            let mut y = x.clone();
            return self.integrate(
                |t| {
                    y[level] = t;
                    f(&y)
                },
                lo[level],
                hi[level],
                &breaks,
            );
        }
        // Inner integrals are solved tighter so the outer error estimate is
        // not polluted by their noise.
        let inner = Quadrature {
            abs_tol: self.abs_tol * 1e-2,
            rel_tol: self.rel_tol * 1e-2,
            max_panels: self.max_panels,
        };
        let mut y = x.clone();
        self.integrate(
            |t| {
                y[level] = t;
                match inner.nested(f, lo, hi, inner_breaks, level + 1, &mut y, failure) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            lo[level],
            hi[level],
            &[],
        )
    }
}

/// Composite Simpson rule on a logarithmic grid over `[a, b]` (`0 < a < b`)
/// with `per_decade` intervals per factor of ten.
pub fn log_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, per_decade: usize) -> f64 {
    assert!(a > 0.0 && b > a);
    let decades = (b / a).log10();
    let mut m = ((decades * per_decade as f64).ceil() as usize).max(2);
    if m % 2 == 1 {
        m += 1;
    }
    let (la, lb) = (a.ln(), b.ln());
    let h = (lb - la) / m as f64;
    let g = |u: f64| {
        let r = u.exp();
        f(r) * r
    };
    let mut s = g(la) + g(lb);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * g(la + i as f64 * h);
    }
    s * h / 3.0
}
