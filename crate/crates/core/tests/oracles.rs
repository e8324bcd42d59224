//! Worked values checked through the public API against closed forms.

use std::f64::consts::{E, PI};

use hypermatch_core::bounds::{alpha2, alpha2_hu, alpha_p, lattice_sum};
use hypermatch_core::process::{sample_ginibre, sample_poisson};
use hypermatch_core::spectral::scattering_intensity;
use hypermatch_core::stats::variance_with_stderr;
use hypermatch_core::transport::{semidiscrete_w2, sinkhorn_w2, stable_matching, SemidiscreteOptions, SinkhornOptions};
use hypermatch_core::{CostFn, PointSet, RpcmModel, Window};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn torus_geometry_examples() {
    let w = Window::new(2, 1.0).unwrap();
    assert!(close(w.toroidal_distance(&[0.0, 0.0], &[PI, PI]).unwrap(), PI * 2f64.sqrt(), 1e-14));
    assert!(close(Window::new(1, 1.0).unwrap().gamma_n(&[PI]), PI, 1e-14));
    let w3 = Window::new(3, 5.0).unwrap();
    assert_eq!(w3.gamma_n(&[0.0, 0.0, w3.side()]), w3.volume());
    assert!(close(w3.volume(), (2.0 * PI).powi(3) * 5.0, 1e-14));
}

#[test]
fn model_constants() {
    let g = RpcmModel::ginibre_unit();
    assert!(close(g.beta_total().unwrap(), -1.0, 1e-9));
    assert!(close(g.epsilon(1e-5).unwrap() / 1e-5, 0.5, 1e-5));
    assert!(close(g.epsilon(1e6).unwrap(), 1.0, 1e-5));
    assert!(close(g.b_n(1e3).unwrap(), 2.0, 1e-6));
    assert!(g.structure_factor(&[0.0, 0.0]).unwrap().abs() < 1e-9);
    let li = g.log_integral().unwrap();
    assert!(li.is_finite() && li < 0.1);
    for d in 1..=3 {
        let c = RpcmModel::cloaked_lattice(d).unwrap();
        assert!(close(c.beta_total().unwrap(), -1.0, 1e-8));
        assert!(c.structure_factor(&vec![0.0; d]).unwrap().abs() < 1e-9);
    }
    let mut prev = f64::INFINITY;
    for &n in &[4.0, 64.0, 1024.0] {
        let r = g.predicted_variance(n).unwrap() / n;
        assert!(r < prev);
        prev = r;
    }
}

#[test]
fn antipodal_pair_cancels_odd_modes() {
    let w = Window::new(1, 1.0).unwrap();
    let p = PointSet::from_points(w, &[vec![0.3], vec![0.3 - PI]]).unwrap();
    for m in [1i64, 3, 5] {
        assert!(scattering_intensity(&p, &[m]).unwrap() < 1e-24);
    }
    assert!(close(scattering_intensity(&p, &[2]).unwrap(), 2.0, 1e-12));
}

#[test]
fn single_point_transport_on_the_circle() {
    let w = Window::new(1, 1.0).unwrap();
    let p = PointSet::from_points(w, &[vec![1.0]]).unwrap();
    let r = semidiscrete_w2(&p, &SemidiscreteOptions { grid_per_point: 4096, ..Default::default() }).unwrap();
    assert!((r.cost - PI * PI / 3.0).abs() < 1e-5, "{}", r.cost);
}

#[test]
fn two_pair_stable_matching() {
    let w = Window::from_side(1, 8.0).unwrap();
    let a = PointSet::from_points(w, &[vec![0.0], vec![1.0]]).unwrap();
    let b = PointSet::from_points(w, &[vec![0.9], vec![0.1]]).unwrap();
    let mut pairs = stable_matching(&a, &b, &CostFn::power(2.0).unwrap()).unwrap().pairs;
    pairs.sort();
    assert_eq!(pairs, vec![(0, 1), (1, 0)]);
}

#[test]
fn cost_and_rate_values() {
    assert!(close(CostFn::log_weighted(1.0, 2.0).unwrap().eval(E), E / 2.0, 1e-15));
    assert!(close(alpha2(E * E, 1.0, 2).unwrap(), 2.0 * E * E, 1e-14));
    assert_eq!(alpha2(10.0, 2.0, 3).unwrap(), 20.0);
    assert!(close(alpha_p(E, 1.0, 1, 0.5).unwrap(), E, 1e-14));
    let c = RpcmModel::cloaked_lattice(2).unwrap();
    for k in 4..16 {
        let n = 2f64.powi(k);
        let r = alpha2_hu(n, &c, 1.0).unwrap() / n;
        assert!(r > 0.0 && r < 10.0, "n={n}: {r}");
    }
}

#[test]
fn lattice_sum_grows_like_two_pi_log() {
    let gap = |t: f64| lattice_sum(2, t) - 2.0 * PI * t.ln();
    let (a, b, c) = (gap(50.0), gap(200.0), gap(800.0));
    assert!((b - a).abs() < 0.5 && (c - b).abs() < 0.2, "{a} {b} {c}");
}

#[test]
fn ginibre_count_mean_and_variance() {
    // Small window; the variance is compared to the model prediction.
    let w = Window::new(2, 1.0).unwrap();
    let counts: Vec<f64> = (0..600).map(|s| sample_ginibre(&w, s).unwrap().len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    assert!((mean / w.volume() - 1.0).abs() < 0.02, "{mean}");
    let (var, se) = variance_with_stderr(&counts);
    let predicted = RpcmModel::ginibre_unit().predicted_variance(1.0).unwrap();
    assert!((var - predicted).abs() < 4.0 * se, "{var} ± {se} vs {predicted}");
    assert!(var < 0.5 * mean);
}

#[test]
fn entropic_and_exact_costs_agree() {
    let w = Window::from_expected_count(2, 256.0).unwrap();
    let p = sample_poisson(&w, 11);
    let exact = semidiscrete_w2(&p, &SemidiscreteOptions::default()).unwrap().cost;
    let approx = sinkhorn_w2(&p, &SinkhornOptions::default()).unwrap().cost;
    assert!((approx - exact).abs() < 0.05 * exact, "{approx} vs {exact}");
}
