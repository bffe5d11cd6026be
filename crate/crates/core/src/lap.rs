//! Minimum-cost assignment on small square float matrices.
//!
//! Potential-based shortest-augmenting-path formulation, O(n^3). Intended for
//! prototype pairing, so n stays in the single digits; the tests check it
//! against exhaustive permutation search.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const NONE: usize = usize::MAX;

/// Returns `assign` with `assign[row] = col` minimizing the total cost of a
/// perfect matching on a square cost matrix.
pub fn min_cost_assignment(cost: &Matrix) -> Result<Vec<usize>> {
    if cost.rows() != cost.cols() {
        return Err(Error::shape(
            "min_cost_assignment",
            format!("{:?} not square", cost.shape()),
        ));
    }
    let n = cost.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !cost.is_finite() {
        return Err(Error::Numeric("assignment costs must be finite".to_string()));
    }

    let mut u = vec![0.0f64; n]; // row potentials
    let mut v = vec![0.0f64; n + 1]; // column potentials, last is the virtual start column
    let mut col_row = vec![NONE; n + 1]; // row currently matched to each column
    let mut way = vec![n; n + 1];

    for row in 0..n {
        col_row[n] = row;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    if col_row[j] != NONE {
                        u[col_row[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == NONE {
                break;
            }
        }
        // Augment along the recorded path.
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut assign = vec![NONE; n];
    for (j, &r) in col_row.iter().enumerate().take(n) {
        if r != NONE {
            assign[r] = j;
        }
    }
    debug_assert!(assign.iter().all(|&j| j != NONE));
    Ok(assign)
}

/// Total cost of an assignment under a cost matrix.
pub fn assignment_cost(cost: &Matrix, assign: &[usize]) -> f64 {
    assign
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum()
}

#[cfg(test)]
pub(crate) fn brute_force_assignment(cost: &Matrix) -> (Vec<usize>, f64) {
    fn permute(
        remaining: &mut Vec<usize>,
        chosen: &mut Vec<usize>,
        cost: &Matrix,
        best: &mut (Vec<usize>, f64),
    ) {
        if remaining.is_empty() {
            let c = assignment_cost(cost, chosen);
            if c < best.1 {
                *best = (chosen.clone(), c);
            }
            return;
        }
        for idx in 0..remaining.len() {
            let col = remaining.remove(idx);
            chosen.push(col);
            permute(remaining, chosen, cost, best);
            chosen.pop();
            remaining.insert(idx, col);
        }
    }
    let n = cost.rows();
    let mut best = (Vec::new(), f64::INFINITY);
    permute(&mut (0..n).collect(), &mut Vec::new(), cost, &mut best);
    best
}
