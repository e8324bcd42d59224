//! Small streaming statistics used by the Monte Carlo estimators.

/// Running mean and centered second moment (Welford), mergeable so that
/// per-worker partial sums can be combined in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let total = n1 + n2;
        let delta = other.mean - self.mean;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.count += other.count;
    }

    /// Unbiased sample variance; zero with fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample variance of `xs` together with its standard error, using the
/// fourth central moment: Var(s²) ≈ (μ₄ − σ⁴ (r−3)/(r−1)) / r.
pub fn variance_with_stderr(xs: &[f64]) -> (f64, f64) {
    let r = xs.len();
    if r < 2 {
        return (0.0, 0.0);
    }
    let rf = r as f64;
    let mean = xs.iter().sum::<f64>() / rf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / rf;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / rf;
    let s2 = m2 * rf / (rf - 1.0);
    let var_s2 = if r > 3 {
        ((m4 - s2 * s2 * (rf - 3.0) / (rf - 1.0)) / rf).max(0.0)
    } else {
        0.0
    };
    (s2, var_s2.sqrt())
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Quantile of an ascending sample (linear interpolation between order
/// statistics).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let p = p.clamp(0.0, 1.0);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
