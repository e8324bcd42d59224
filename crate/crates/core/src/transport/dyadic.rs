//! Hierarchical matching over randomly shifted dyadic cubes.
//!
//! At level k the torus of side 2^K is cut into cubes of side 2^k whose
//! corners sit at U_k + 2^k Z^d, with U_k = Σ_{i<k} 2^i Z_i and Z_i uniform
//! in {0,1}^d. The offsets make level k+1 cubes unions of level k cubes. In
//! every cube as many still unmatched points as possible are paired by
//! iterated mutual nearest neighbours. Points left after level K are paired
//! by an optimal assignment over the whole torus, tagged level K+1.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::process::PointSet;
use crate::rng;

use super::assignment::assign_subsets;
use super::{check_pair, greedy_pairs, CostFn, MatchResult};

/// Offsets U_1..U_K (each a d-vector) drawn from `seed`.
pub fn dyadic_offsets(d: usize, levels: u32, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(seed);
    let mut u = vec![0.0; d];
    let mut out = Vec::with_capacity(levels as usize);
    for k in 0..levels {
        for ui in u.iter_mut() {
            if r.random::<bool>() {
                *ui += 2f64.powi(k as i32);
            }
        }
        out.push(u.clone());
    }
    out
}

/// Number of dyadic levels K with side = 2^K, if the side is a power of 2.
fn dyadic_depth(side: f64) -> Option<u32> {
    let k = side.log2().round();
    if k >= 0.0 && k < 60.0 && 2f64.powi(k as i32) == side {
        Some(k as u32)
    } else {
        None
    }
}

fn cube_key(x: &[f64], half: f64, offset: &[f64], width: f64, per_axis: u64) -> Vec<u64> {
    x.iter()
        .zip(offset)
        .map(|(&xi, &o)| {
            let c = ((xi + half - o) / width).floor() as i64;
            c.rem_euclid(per_axis as i64) as u64
        })
        .collect()
}

/// Dyadic matching of `a` to `b` with cube offsets drawn from `seed`.
/// The window side must be 2^K. Unequal cardinalities leave the surplus
/// unmatched.
pub fn dyadic_matching(a: &PointSet, b: &PointSet, cost: &CostFn, seed: u64) -> Result<MatchResult> {
    check_pair(a, b)?;
    let w = a.window();
    let depth = dyadic_depth(w.side()).ok_or(Error::IncompatibleWindow { side: w.side() })?;
    let offsets = dyadic_offsets(w.dim(), depth, seed);
    let half = 0.5 * w.side();
    let mut free_a: Vec<usize> = (0..a.len()).collect();
    let mut free_b: Vec<usize> = (0..b.len()).collect();
    let mut pairs = Vec::with_capacity(a.len().min(b.len()));
    let mut levels = Vec::with_capacity(pairs.capacity());

    for k in 1..=depth {
        if free_a.is_empty() || free_b.is_empty() {
            break;
        }
        let width = 2f64.powi(k as i32);
        let per_axis = 1u64 << (depth - k);
        let off = &offsets[k as usize - 1];
        let mut cubes: BTreeMap<Vec<u64>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for &i in &free_a {
            cubes.entry(cube_key(a.point(i), half, off, width, per_axis)).or_default().0.push(i);
        }
        for &j in &free_b {
            cubes.entry(cube_key(b.point(j), half, off, width, per_axis)).or_default().1.push(j);
        }
        let mut matched_a = vec![false; a.len()];
        let mut matched_b = vec![false; b.len()];
        for (ia, ib) in cubes.values() {
            if ia.is_empty() || ib.is_empty() {
                continue;
            }
            for (i, j) in greedy_pairs(a, b, ia, ib) {
                matched_a[i] = true;
                matched_b[j] = true;
                pairs.push((i, j));
                levels.push(k as i32);
            }
        }
        free_a.retain(|&i| !matched_a[i]);
        free_b.retain(|&j| !matched_b[j]);
    }

    if !free_a.is_empty() && !free_b.is_empty() {
        for p in assign_subsets(a, b, &free_a, &free_b, cost)? {
            pairs.push(p);
            levels.push(depth as i32 + 1);
        }
    }
    Ok(MatchResult::from_pairs(a, b, pairs, levels, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::process::sample_poisson;

    #[test]
    fn offsets_are_nested() {
        let offs = dyadic_offsets(3, 6, 5);
        assert!(offs[0].iter().all(|&u| u == 0.0 || u == 1.0));
        for k in 1..offs.len() {
            for i in 0..3 {
                let step = offs[k][i] - offs[k - 1][i];
                assert!(step == 0.0 || step == 2f64.powi(k as i32));
            }
        }
    }

    #[test]
    fn needs_power_of_two_side() {
        let w = Window::from_side(2, 12.0).unwrap();
        let p = sample_poisson(&w, 1);
        let c = CostFn::Power { p: 1.0 };
        assert!(matches!(dyadic_matching(&p, &p, &c, 0), Err(Error::IncompatibleWindow { .. })));
    }

    #[test]
    fn identical_sets_match_at_level_one() {
        let w = Window::from_side(2, 16.0).unwrap();
        let p = sample_poisson(&w, 4);
        let r = dyadic_matching(&p, &p, &CostFn::Power { p: 2.0 }, 7).unwrap();
        assert!(r.is_perfect());
        assert!(r.levels.iter().all(|&l| l == 1));
        assert!(r.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn level_distances_and_unmatched_counts() {
        let c = CostFn::Power { p: 1.0 };
        for d in 1..=3 {
            let side = if d == 3 { 8.0 } else { 32.0 };
            let w = Window::from_side(d, side).unwrap();
            let depth = dyadic_depth(side).unwrap();
            for seed in 0..10 {
                let a = sample_poisson(&w, 100 + seed);
                let b = sample_poisson(&w, 200 + seed);
                let r = dyadic_matching(&a, &b, &c, seed).unwrap();
                assert_eq!(r.len(), a.len().min(b.len()));
                for (&dist, &l) in r.distances.iter().zip(&r.levels) {
                    if l <= depth as i32 {
                        assert!(dist <= (d as f64).sqrt() * 2f64.powi(l) + 1e-9);
                    }
                }
                // After level k the a-points left over are exactly
                // Σ_C (a(C) − b(C))_+ over the level-k cubes.
                let offs = dyadic_offsets(d, depth, seed);
                for k in 1..=depth {
                    let width = 2f64.powi(k as i32);
                    let per = 1u64 << (depth - k);
                    let mut counts: BTreeMap<Vec<u64>, (i64, i64)> = BTreeMap::new();
                    for p in a.points() {
                        counts.entry(cube_key(p, side / 2.0, &offs[k as usize - 1], width, per)).or_default().0 += 1;
                    }
                    for p in b.points() {
                        counts.entry(cube_key(p, side / 2.0, &offs[k as usize - 1], width, per)).or_default().1 += 1;
                    }
                    let bound: i64 = counts.values().map(|(x, y)| (x - y).max(0)).sum();
                    let matched_by_k = r.levels.iter().filter(|&&l| l <= k as i32).count() as i64;
                    assert_eq!(a.len() as i64 - matched_by_k, bound);
                }
            }
        }
    }

    #[test]
    fn equal_counts_give_perfect_matching() {
        let w = Window::from_side(2, 8.0).unwrap();
        let a = crate::process::sample_cloaked_lattice(&w, 1).unwrap();
        let b = crate::process::sample_shifted_lattice(&w, 2).unwrap();
        let r = dyadic_matching(&a, &b, &CostFn::Power { p: 2.0 }, 3).unwrap();
        assert!(r.is_perfect());
    }
}
