//! Dense linear sum assignment by shortest augmenting paths with dual
//! variables (Jonker–Volgenant style, one augmentation per row).

use crate::error::{Error, Result};
use crate::process::PointSet;

use super::{check_pair, CostFn, MatchResult, NO_LEVEL};

/// Solves min Σ cost[i, col(i)] over injections rows → columns for a
/// row-major `rows × cols` matrix with `rows ≤ cols`. Returns the column of
/// each row. No structure is assumed of the costs beyond finiteness.
pub fn lsap(cost: &[f64], rows: usize, cols: usize) -> Result<Vec<usize>> {
    if rows > cols {
        return Err(Error::CardinalityMismatch { left: rows, right: cols });
    }
    if cost.len() != rows * cols {
        return Err(Error::InvalidParameter("cost matrix has the wrong size".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Infeasible);
    }
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; rows];
    let mut v = vec![0.0; cols];
    let mut shortest = vec![f64::INFINITY; cols];
    let mut path = vec![NONE; cols];
    let mut col4row = vec![NONE; rows];
    let mut row4col = vec![NONE; cols];
    let mut remaining = vec![0usize; cols];
    let mut sr = vec![false; rows];
    let mut sc = vec![false; cols];

    for cur in 0..rows {
        let mut min_val = 0.0;
        let mut i = cur;
        let mut num_remaining = cols;
        for (it, r) in remaining.iter_mut().enumerate() {
            // Reverse order keeps ties resolving towards low column indices.
            *r = cols - 1 - it;
        }
        sr.fill(false);
        sc.fill(false);
        shortest.fill(f64::INFINITY);
        let sink = loop {
            sr[i] = true;
            let mut index = NONE;
            let mut lowest = f64::INFINITY;
            let row = &cost[i * cols..(i + 1) * cols];
            for (it, &j) in remaining[..num_remaining].iter().enumerate() {
                let r = min_val + row[j] - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == NONE) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            if index == NONE || !min_val.is_finite() {
                return Err(Error::Infeasible);
            }
            let j = remaining[index];
            sc[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for r in 0..rows {
            if sr[r] && r != cur {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for c in 0..cols {
            if sc[c] {
                v[c] -= min_val - shortest[c];
            }
        }
        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur {
                break;
            }
        }
    }
    Ok(col4row)
}

/// Optimal bijection between equal-size point sets minimising Σ w(d).
pub fn exact_matching(a: &PointSet, b: &PointSet, cost: &CostFn) -> Result<MatchResult> {
    check_pair(a, b)?;
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pairs = assign_subsets(a, b, &(0..a.len()).collect::<Vec<_>>(), &(0..b.len()).collect::<Vec<_>>(), cost)?;
    let levels = vec![NO_LEVEL; pairs.len()];
    Ok(MatchResult::from_pairs(a, b, pairs, levels, cost))
}

/// Optimal assignment between index subsets; the smaller side is fully
/// matched.
pub(crate) fn assign_subsets(a: &PointSet, b: &PointSet, ia: &[usize], ib: &[usize], cost: &CostFn) -> Result<Vec<(usize, usize)>> {
    let w = a.window();
    let transpose = ia.len() > ib.len();
    let (rows, cols) = if transpose { (ib, ia) } else { (ia, ib) };
    let (pr, pc) = if transpose { (b, a) } else { (a, b) };
    let mut m = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            m.push(cost.eval(w.dist2(pr.point(r), pc.point(c)).sqrt()));
        }
    }
    let sol = lsap(&m, rows.len(), cols.len())?;
    Ok(sol
        .iter()
        .enumerate()
        .map(|(r, &c)| if transpose { (cols[c], rows[r]) } else { (rows[r], cols[c]) })
        .collect())
}
