//! Stable marriage under a symmetric metric preference: repeatedly pair the
//! globally closest free couple, which is the same as iterating mutually
//! nearest pairs.

use crate::error::{Error, Result};
use crate::process::PointSet;

use super::{check_pair, CostFn, MatchResult, NO_LEVEL};

/// Greedy closest-pair matching between index subsets of `a` and `b`.
/// Ties are broken by (source, target) index. Matches min(|ia|, |ib|) pairs.
pub fn greedy_pairs(a: &PointSet, b: &PointSet, ia: &[usize], ib: &[usize]) -> Vec<(usize, usize)> {
    let w = a.window();
    if ia.len() == 1 && ib.len() == 1 {
        return vec![(ia[0], ib[0])];
    }
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(ia.len() * ib.len());
    for &i in ia {
        for &j in ib {
            cand.push((w.dist2(a.point(i), b.point(j)), i, j));
        }
    }
    cand.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let want = ia.len().min(ib.len());
    let mut used_a = std::collections::HashSet::with_capacity(want);
    let mut used_b = std::collections::HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    for (_, i, j) in cand {
        if out.len() == want {
            break;
        }
        if !used_a.contains(&i) && !used_b.contains(&j) {
            used_a.insert(i);
            used_b.insert(j);
            out.push((i, j));
        }
    }
    out
}

/// Baseline matching by iterated mutually nearest pairs. Deterministic,
/// never claimed optimal.
pub fn stable_matching(a: &PointSet, b: &PointSet, cost: &CostFn) -> Result<MatchResult> {
    check_pair(a, b)?;
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch { left: a.len(), right: b.len() });
    }
    let ia: Vec<usize> = (0..a.len()).collect();
    let ib: Vec<usize> = (0..b.len()).collect();
    let pairs = greedy_pairs(a, b, &ia, &ib);
    let levels = vec![NO_LEVEL; pairs.len()];
    Ok(MatchResult::from_pairs(a, b, pairs, levels, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::process::sample_poisson;
    use crate::transport::exact_matching;

    #[test]
    fn identity_and_hand_example() {
        let w = Window::from_side(1, 8.0).unwrap();
        let a = PointSet::from_points(w, &[vec![0.0], vec![1.0]]).unwrap();
        let b = PointSet::from_points(w, &[vec![0.1], vec![0.9]]).unwrap();
        let c = CostFn::Power { p: 2.0 };
        let r = stable_matching(&a, &b, &c).unwrap();
        let mut pairs = r.pairs.clone();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        let s = stable_matching(&a, &a, &c).unwrap();
        assert!(s.pairs.iter().all(|&(i, j)| i == j) && s.total_cost == 0.0);
    }

    #[test]
    fn stable_and_above_optimum() {
        let c = CostFn::Power { p: 2.0 };
        for seed in 0..40u64 {
            let w = Window::new(2, 0.5).unwrap();
            let a = sample_poisson(&w, 2 * seed);
            let b0 = sample_poisson(&w, 2 * seed + 1);
            let k = a.len().min(b0.len()).min(32);
            if k == 0 {
                continue;
            }
            let a = PointSet::new(w, a.coords()[..2 * k].to_vec(), None, 0).unwrap();
            let b = PointSet::new(w, b0.coords()[..2 * k].to_vec(), None, 0).unwrap();
            let s = stable_matching(&a, &b, &c).unwrap();
            let e = exact_matching(&a, &b, &c).unwrap();
            assert!(s.total_cost >= e.total_cost - 1e-9);
            // No blocking couple: x and y' prefer each other to their partners.
            let partner_b: Vec<usize> = {
                let mut v = vec![0; k];
                for &(i, j) in &s.pairs {
                    v[i] = j;
                }
                v
            };
            let partner_a: Vec<usize> = {
                let mut v = vec![0; k];
                for &(i, j) in &s.pairs {
                    v[j] = i;
                }
                v
            };
            for x in 0..k {
                for y in 0..k {
                    let dxy = w.dist2(a.point(x), b.point(y));
                    let dx = w.dist2(a.point(x), b.point(partner_b[x]));
                    let dy = w.dist2(a.point(partner_a[y]), b.point(y));
                    assert!(!(dxy < dx && dxy < dy));
                }
            }
        }
    }
}
