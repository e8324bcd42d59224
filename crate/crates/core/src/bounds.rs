//! Closed-form rate functions and the Fourier-analytic transport bounds on
//! the unit torus Λ_1. Unspecified universal constants are set to one.

use crate::error::{Error, Result};
use crate::fmt::{f17, SCHEMA_LINE};
use crate::quad::log_simpson;
use crate::rpcm::RpcmModel;
use crate::transport::CostFn;

/// Weight q in the general continuity-modulus bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QFunction {
    /// q(x) = ln(2x)·(ln ln(3x))^γ, γ > 1.
    LogLogLog { gamma: f64 },
    /// q ≡ L on the dyadic scales 2^k ≤ t₀, L = ⌊log₂ t₀⌋ + 1, so A_q = 1.
    ConstantOnDyadics { t0: f64 },
}

/// Terms of Σ 1/q(2^k) summed explicitly before the integral tail.
const A_Q_TERMS: u32 = 1_000_000;

impl QFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QFunction::LogLogLog { gamma } if gamma > 1.0 && gamma.is_finite() => Ok(()),
            QFunction::ConstantOnDyadics { t0 } if t0 >= 1.0 && t0.is_finite() => Ok(()),
            _ => Err(Error::InvalidParameter(format!("{self:?}"))),
        }
    }

    fn levels(t0: f64) -> f64 {
        t0.log2().floor() + 1.0
    }

    /// q(x) for x ≥ 1.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            QFunction::LogLogLog { gamma } => (2.0 * x).ln() * (3.0 * x).ln().ln().powf(gamma),
            QFunction::ConstantOnDyadics { t0 } => Self::levels(t0),
        }
    }

    /// A_q = Σ_{k ≥ 0} 1/q(2^k), restricted to 2^k ≤ t₀ for the dyadic
    /// constant.
    pub fn a_q(&self) -> f64 {
        match *self {
            QFunction::LogLogLog { gamma } => {
                let ln2 = std::f64::consts::LN_2;
                let mut s = 0.0;
                for k in (0..A_Q_TERMS).rev() {
                    let x = 2f64.powi(k as i32);
                    // Large k: evaluate through logarithms to avoid overflow.
                    let ln2x = (k + 1) as f64 * ln2;
                    let ln3x = 3f64.ln() + k as f64 * ln2;
                    let _ = x;
                    s += 1.0 / (ln2x * ln3x.ln().powf(gamma));
                }
                // Σ_{k ≥ K} ≈ ∫ du /(ln 2 · u (ln u)^γ) with u = ln(3·2^k).
                let u = 3f64.ln() + A_Q_TERMS as f64 * ln2;
                s + u.ln().powf(1.0 - gamma) / ((gamma - 1.0) * ln2)
            }
            QFunction::ConstantOnDyadics { .. } => 1.0,
        }
    }
}

/// Choice between the two general bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlVariant {
    /// A_q² Σ q(‖m‖) w(‖m‖⁻¹)² |f(m)|² + w(t₀⁻¹)².
    WeightedQ,
    /// ln(t₀) Σ w(‖m‖⁻¹)² |f(m)|² + w(t₀⁻¹)².
    LogT0,
}

fn norm(m: &[i64]) -> f64 {
    (m.iter().map(|x| (x * x) as f64).sum::<f64>()).sqrt()
}

fn check_t0(t0: f64) -> Result<()> {
    if t0 >= 1.0 && t0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t0 = {t0}")))
    }
}

/// Σ_{0<‖m‖≤t₀} ‖m‖⁻² |f_P(m)|² + t₀⁻², bounding W̃₂²(P, uniform) on Λ_1.
/// `coeffs` pairs each mode with |f_P(m)|²; modes outside the ball are
/// ignored.
pub fn bl_w2_bound(coeffs: &[(Vec<i64>, f64)], t0: f64) -> Result<f64> {
    check_t0(t0)?;
    let s: f64 = coeffs
        .iter()
        .filter_map(|(m, f)| {
            let r = norm(m);
            (r > 0.0 && r <= t0).then(|| f / (r * r))
        })
        .sum();
    Ok(s + t0.powi(-2))
}

/// Same shape as [`bl_w2_bound`] with the coefficients of P − Q, bounding
/// W̃₁² for an arbitrary Q.
pub fn bl_w1_bound(diff_coeffs: &[(Vec<i64>, f64)], t0: f64) -> Result<f64> {
    bl_w2_bound(diff_coeffs, t0)
}

/// Bound on the squared cost C̃_w²(P, Q) for a continuity modulus w.
pub fn bl_general_bound(coeffs: &[(Vec<i64>, f64)], t0: f64, w: &CostFn, q: &QFunction, variant: BlVariant) -> Result<f64> {
    check_t0(t0)?;
    w.validate()?;
    if !w.is_modulus() {
        return Err(Error::NonModulusCost);
    }
    q.validate()?;
    let tail = w.eval(1.0 / t0).powi(2);
    let terms = coeffs.iter().filter_map(|(m, f)| {
        let r = norm(m);
        (r > 0.0 && r <= t0).then_some((r, *f))
    });
    let s: f64 = match variant {
        BlVariant::WeightedQ => q.a_q().powi(2) * terms.map(|(r, f)| q.eval(r) * w.eval(1.0 / r).powi(2) * f).sum::<f64>(),
        BlVariant::LogT0 => t0.ln() * terms.map(|(r, f)| w.eval(1.0 / r).powi(2) * f).sum::<f64>(),
    };
    Ok(s + tail)
}

/// Σ_{0<‖m‖≤t₀} ‖m‖⁻² over Z^d by exact enumeration.
pub fn lattice_sum(d: usize, t0: f64) -> f64 {
    crate::spectral::enumerate_modes(d, t0).iter().map(|m| norm(m).powi(-2)).sum()
}

fn check_n(n: f64) -> Result<()> {
    if n >= 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("rate functions need n ≥ 2, got {n}")))
    }
}

/// α₂(n) = b_n·{n², n ln n, n} for d = 1, 2, ≥ 3.
pub fn alpha2(n: f64, b_n: f64, d: usize) -> Result<f64> {
    check_n(n)?;
    Ok(b_n
        * match d {
            1 => n * n,
            2 => n * n.ln(),
            3 | 4 => n,
            _ => return Err(Error::UnsupportedDimension(d)),
        })
}

/// α_p(n) for p ∈ (0, 1], the five-case table.
pub fn alpha_p(n: f64, b_n: f64, d: usize, p: f64) -> Result<f64> {
    check_n(n)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Unsupported(format!("alpha_p with p = {p}")));
    }
    let ln = n.ln();
    Ok(match d {
        1 if p > 0.5 => b_n.sqrt() * n * n.powf(p - 0.5),
        1 if p == 0.5 => b_n.sqrt() * n * ln,
        1 => b_n.sqrt() * n * ln.sqrt(),
        2 => b_n.powf(p).sqrt() * n * ln.powf(p).sqrt(),
        3 | 4 => b_n.powf(p).sqrt() * n,
        _ => return Err(Error::UnsupportedDimension(d)),
    })
}

/// Nodes per decade of the logarithmic grid for the hyperuniform rate.
const HU_NODES_PER_DECADE: usize = 64;

/// n·(1 + ∫_{n^{−1/d}}^{c₀} ε(r) r^{d−3} dr).
pub fn alpha2_hu(n: f64, model: &RpcmModel, c0: f64) -> Result<f64> {
    if !model.is_integrable() {
        return Err(Error::NonIntegrableModel);
    }
    if !(n > 0.0 && c0 > 0.0) {
        return Err(Error::InvalidParameter("alpha2_hu needs n, c0 > 0".into()));
    }
    let d = model.dim();
    let lo = n.powf(-1.0 / d as f64);
    if lo == c0 {
        return Ok(n);
    }
    let (a, b, sign) = if lo < c0 { (lo, c0, 1.0) } else { (c0, lo, -1.0) };
    let failure = std::cell::RefCell::new(None);
    let integral = log_simpson(
        |r| match model.epsilon(r) {
            Ok(e) => e * r.powi(d as i32 - 3),
            Err(err) => {
                failure.borrow_mut().get_or_insert(err);
                0.0
            }
        },
        a,
        b,
        HU_NODES_PER_DECADE,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(n * (1.0 + sign * integral))
}

/// min(1, r^{−d/2} √(σ_μ + σ_ν)).
pub fn tail_bound(r: f64, sigma_mu: f64, sigma_nu: f64, d: usize) -> Result<f64> {
    if !(r > 0.0) || sigma_mu < 0.0 || sigma_nu < 0.0 {
        return Err(Error::InvalidParameter("tail_bound needs r > 0 and σ ≥ 0".into()));
    }
    Ok((r.powf(-(d as f64) / 2.0) * (sigma_mu + sigma_nu).sqrt()).min(1.0))
}

/// Dimension-dependent moment weight: √x/(1+|ln x|^γ) for d = 1,
/// x/(1+|ln x|^γ) for d = 2 and x² for d ≥ 3.
pub fn moment_weight(d: usize, gamma: f64) -> Result<CostFn> {
    match d {
        1 => CostFn::log_weighted(0.5, gamma),
        2 => CostFn::log_weighted(1.0, gamma),
        3 | 4 => CostFn::power(2.0),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Mean of w(X) over a distance sample.
pub fn weight_moment(dists: &[f64], d: usize, gamma: f64) -> Result<f64> {
    let w = moment_weight(d, gamma)?;
    if dists.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(dists.iter().map(|&x| w.eval(x)).sum::<f64>() / dists.len() as f64)
}

/// Predicted rate values on an n-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePrediction {
    pub family: String,
    pub n: Vec<f64>,
    pub values: Vec<f64>,
}

impl RatePrediction {
    pub fn evaluate(family: &str, ns: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = ns.iter().map(|&n| f(n)).collect::<Result<Vec<_>>>()?;
        if values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter(format!("{family} produced a nonpositive value")));
        }
        Ok(Self { family: family.to_string(), n: ns.to_vec(), values })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SCHEMA_LINE}\nfamily,n,value\n");
        for (n, v) in self.n.iter().zip(&self.values) {
            out.push_str(&format!("{},{},{}\n", self.family, f17(*n), f17(*v)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn w2_bound_examples() {
        let none: Vec<(Vec<i64>, f64)> = crate::spectral::enumerate_modes(2, 5.0).into_iter().map(|m| (m, 0.0)).collect();
        assert!((bl_w2_bound(&none, 5.0).unwrap() - 1.0 / 25.0).abs() < 1e-15);
        let t0 = 100.0;
        let atom: Vec<(Vec<i64>, f64)> = crate::spectral::enumerate_modes(2, t0).into_iter().map(|m| (m, 1.0)).collect();
        let b = bl_w2_bound(&atom, t0).unwrap();
        // Σ‖m‖⁻² over the disk grows like 2π ln t₀ + O(1).
        let excess = b - 2.0 * PI * t0.ln();
        let atom50: Vec<(Vec<i64>, f64)> = crate::spectral::enumerate_modes(2, 50.0).into_iter().map(|m| (m, 1.0)).collect();
        let excess50 = bl_w2_bound(&atom50, 50.0).unwrap() - 2.0 * PI * 50f64.ln();
        assert!((excess - excess50).abs() < 0.05, "{excess} {excess50}");
        let n = 37.0;
        let poisson: Vec<(Vec<i64>, f64)> = atom.iter().map(|(m, _)| (m.clone(), 1.0 / n)).collect();
        let expected = lattice_sum(2, t0) / n + t0.powi(-2);
        assert!((bl_w2_bound(&poisson, t0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn general_bound_guards_and_tail() {
        let q = QFunction::LogLogLog { gamma: 2.0 };
        let zero = vec![(vec![1i64], 0.0)];
        let w = CostFn::Power { p: 0.5 };
        assert!((bl_general_bound(&zero, 16.0, &w, &q, BlVariant::WeightedQ).unwrap() - 0.0625).abs() < 1e-15);
        assert_eq!(bl_general_bound(&zero, 16.0, &CostFn::Power { p: 2.0 }, &q, BlVariant::LogT0), Err(Error::NonModulusCost));
    }

    #[test]
    fn variants_have_the_same_shape() {
        let w = CostFn::Power { p: 1.0 };
        let mut ratios = Vec::new();
        for k in 2..12 {
            let t0 = 2f64.powi(k);
            let coeffs: Vec<(Vec<i64>, f64)> = crate::spectral::enumerate_modes(1, t0).into_iter().map(|m| (m, 1.0)).collect();
            let q = QFunction::ConstantOnDyadics { t0 };
            let a = bl_general_bound(&coeffs, t0, &w, &q, BlVariant::WeightedQ).unwrap();
            let b = bl_general_bound(&coeffs, t0, &w, &q, BlVariant::LogT0).unwrap();
            ratios.push(a / b);
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 2.0, "{ratios:?}");
    }

    #[test]
    fn general_bound_direct_sum() {
        // w = x, |f|² = 1/N, d = 1, t₀ = N with the log variant.
        let n = 64.0;
        let coeffs: Vec<(Vec<i64>, f64)> = crate::spectral::enumerate_modes(1, n).into_iter().map(|m| (m, 1.0 / n)).collect();
        let w = CostFn::Power { p: 1.0 };
        let got = bl_general_bound(&coeffs, n, &w, &QFunction::LogLogLog { gamma: 2.0 }, BlVariant::LogT0).unwrap();
        let direct = n.ln() * 2.0 * (1..=64).map(|j| 1.0 / (j * j) as f64).sum::<f64>() / n + 1.0 / (n * n);
        assert!((got - direct).abs() < 1e-14);
    }

    #[test]
    fn a_q_converges() {
        let q = QFunction::LogLogLog { gamma: 2.0 };
        let a = q.a_q();
        // Partial sums to 10^4 plus a crude integral tail bracket the value.
        let partial: f64 = (0..10_000).map(|k| 1.0 / q.eval(2f64.powi(k.min(1000)) * if k > 1000 { f64::NAN } else { 1.0 })).filter(|v| v.is_finite()).sum();
        assert!(a.is_finite() && a > partial * 0.5);
        assert!(q.eval(1.0) > 0.0 && q.eval(4.0) > q.eval(2.0));
        assert_eq!(QFunction::ConstantOnDyadics { t0: 10.0 }.eval(3.0), 4.0);
    }

    #[test]
    fn rate_tables() {
        assert!((alpha2(E * E, 1.0, 2).unwrap() - 2.0 * E * E).abs() < 1e-12);
        assert_eq!(alpha2(10.0, 2.0, 3).unwrap(), 20.0);
        assert_eq!(alpha2(10.0, 1.0, 1).unwrap(), 100.0);
        assert!((alpha_p(E, 1.0, 1, 0.5).unwrap() - E).abs() < 1e-12);
        assert!(alpha_p(10.0, 1.0, 2, 1.5).is_err());
        assert!(alpha2(1.0, 1.0, 2).is_err());
        for d in 1..=3 {
            for &p in &[0.25, 0.5, 0.75, 1.0] {
                let mut prev = 0.0;
                for k in 1..20 {
                    let v = alpha_p(2f64.powi(k), 1.5, d, p).unwrap();
                    assert!(v > prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn hu_rate() {
        let poisson = RpcmModel::poisson(2).unwrap();
        assert_eq!(alpha2_hu(100.0, &poisson, 1.0).unwrap(), 100.0);
        let g = RpcmModel::ginibre_unit();
        let cap = 1.0 + crate::quad::Quadrature::new(1e-10, 1e-8)
            .integrate(|r| g.epsilon(r).unwrap() / r, 1e-9, 1.0, &[])
            .unwrap();
        let mut ratios = Vec::new();
        for k in 6..=14 {
            let n = 2f64.powi(k);
            let a = alpha2_hu(n, &g, 1.0).unwrap();
            assert!(a / n < cap);
            ratios.push(a / alpha2(n, g.b_n(n).unwrap(), 2).unwrap());
        }
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn hu_rate_logarithmic_in_one_dimension() {
        // ε(r) = r·∫|x||β| near 0: the integral of ε(r) r^{-2} grows like ln n.
        let r: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
        let density: Vec<f64> = r.iter().map(|&x| -(-PI * x * x).exp()).collect();
        let m = RpcmModel::new(crate::rpcm::RpcmKind::Table { r, density, integrable: true }, 1).unwrap();
        let a = alpha2_hu(1e4, &m, 1.0).unwrap() / 1e4;
        let b = alpha2_hu(1e6, &m, 1.0).unwrap() / 1e6;
        // Slope in ln n equals ∫|x||β| = 2∫x e^{-πx²} = 1/π.
        let slope = (b - a) / (1e6f64.ln() - 1e4f64.ln());
        assert!((slope - 1.0 / PI).abs() < 1e-3, "{slope}");
    }

    #[test]
    fn tails_and_moments() {
        assert!((tail_bound(4.0, 1.0, 1.0, 2).unwrap() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(tail_bound(2.0, 1.0, 1.0, 1).unwrap(), 1.0);
        assert_eq!(tail_bound(5.0, 0.0, 0.0, 2).unwrap(), 0.0);
        assert_eq!(weight_moment(&[0.0, 0.0], 2, 2.0).unwrap(), 0.0);
        assert_eq!(weight_moment(&[1.0, 2.0], 3, 2.0).unwrap(), 2.5);
        assert!((weight_moment(&[E], 2, 2.0).unwrap() - E / 2.0).abs() < 1e-15);
    }

    #[test]
    fn prediction_csv() {
        let r = RatePrediction::evaluate("alpha2", &[4.0, 8.0], |n| alpha2(n, 1.0, 3)).unwrap();
        assert!(r.to_csv().starts_with(SCHEMA_LINE));
        assert_eq!(r.to_csv().lines().count(), 4);
    }
}
