//! Small dense linear-algebra helpers over column lists.

use nalgebra::{DMatrix, DVector};

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of Gram-Schmidt with greedy column pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct PivotedRank {
    pub rank: usize,
    /// Selected columns, in selection order.
    pub pivots: Vec<usize>,
    /// Residual norm of each selected column at selection time.
    pub pivot_norms: Vec<f64>,
    /// Orthonormal basis of the selected span.
    pub basis: Vec<Vec<f64>>,
}

/// Numerical rank with column pivoting: a column counts when its residual
/// after projecting out the selected columns exceeds
/// `rel_tol * max(column norm)`.
pub fn pivoted_rank(cols: &[Vec<f64>], rel_tol: f64) -> PivotedRank {
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let mut resid: Vec<Vec<f64>> = cols.to_vec();
    let mut used = vec![false; cols.len()];
    let mut out = PivotedRank { rank: 0, pivots: vec![], pivot_norms: vec![], basis: vec![] };
    if scale == 0.0 {
        return out;
    }
    let dim = cols.first().map_or(0, Vec::len);
    while out.rank < dim {
        let best = (0..cols.len())
            .filter(|&j| !used[j])
            .map(|j| (j, norm(&resid[j])))
            .fold(None, |acc: Option<(usize, f64)>, (j, nj)| match acc {
                Some((_, nb)) if nb >= nj => acc,
                _ => Some((j, nj)),
            });
        let Some((j, nj)) = best else { break };
        if nj <= rel_tol * scale {
            break;
        }
        used[j] = true;
        let q: Vec<f64> = resid[j].iter().map(|x| x / nj).collect();
        for (r, u) in resid.iter_mut().zip(&used) {
            if !u {
                let c = dot(r, &q);
                r.iter_mut().zip(&q).for_each(|(ri, qi)| *ri -= c * qi);
            }
        }
        out.rank += 1;
        out.pivots.push(j);
        out.pivot_norms.push(nj);
        out.basis.push(q);
    }
    out
}

/// Euclidean distance from `v` to the span of an orthonormal basis.
pub fn distance_to_span(v: &[f64], orthonormal: &[Vec<f64>]) -> f64 {
    let mut r = v.to_vec();
    for q in orthonormal {
        let c = dot(&r, q);
        r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= c * qi);
    }
    norm(&r)
}

fn to_matrix(cols: &[Vec<f64>], rows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Minimum-norm solution of `A v = b` where `A` has the given columns, and
/// the residual `|A v - b|`.
pub fn min_norm_solve(cols: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let n = b.len();
    let a = to_matrix(cols, n);
    let rhs = DVector::from_column_slice(b);
    let gram = &a * a.transpose();
    // Cholesky on the Gram matrix only when it is comfortably definite;
    // otherwise the pseudo-inverse via SVD.
    let chol = gram.cholesky().filter(|ch| {
        let d = ch.l_dirty().diagonal();
        d.min() > 1e-6 * d.max()
    });
    let v = match chol {
        Some(ch) => a.transpose() * ch.solve(&rhs),
        None => {
            let svd = a.clone().svd(true, true);
            let tol = 1e-12 * svd.singular_values.max().max(1e-300);
            svd.solve(&rhs, tol).unwrap_or_else(|_| DVector::zeros(cols.len()))
        }
    };
    let res = (&a * &v - &rhs).norm();
    (v.iter().copied().collect(), res)
}

/// Solution supported on the earliest linearly independent columns; the
/// remaining entries are zero.
pub fn low_index_solve(cols: &[Vec<f64>], b: &[f64], rel_tol: f64) -> (Vec<f64>, f64) {
    let n = b.len();
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let mut keep = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        if keep.len() == n {
            break;
        }
        let mut r = c.clone();
        for q in &basis {
            let d = dot(&r, q);
            r.iter_mut().zip(q).for_each(|(ri, qi)| *ri -= d * qi);
        }
        let nr = norm(&r);
        if nr > rel_tol * scale {
            basis.push(r.iter().map(|x| x / nr).collect());
            keep.push(j);
        }
    }
    let sub: Vec<Vec<f64>> = keep.iter().map(|&j| cols[j].clone()).collect();
    let mut v = vec![0.0; cols.len()];
    if sub.is_empty() {
        return (v, norm(b));
    }
    let a = to_matrix(&sub, n);
    let rhs = DVector::from_column_slice(b);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 0.0)
        .unwrap_or_else(|_| DVector::zeros(sub.len()));
    for (slot, &j) in keep.iter().enumerate() {
        v[j] = sol[slot];
    }
    let res = (&a * &sol - &rhs).norm();
    (v, res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_with_dependent_columns() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 3.0]];
        let r = pivoted_rank(&cols, 1e-8);
        assert_eq!(r.rank, 2);
        assert_eq!(r.pivots, vec![2, 1]);
        assert_eq!(pivoted_rank(&[vec![0.0, 0.0]], 1e-8).rank, 0);
    }

    #[test]
    fn distance() {
        let basis = vec![vec![1.0, 0.0, 0.0]];
        assert_eq!(distance_to_span(&[3.0, 0.0, 4.0], &basis), 4.0);
    }

    #[test]
    fn min_norm_prefers_spread_weights() {
        // x = v0 + v1 has min-norm solution (1/2, 1/2)
        let cols = vec![vec![1.0], vec![1.0]];
        let (v, res) = min_norm_solve(&cols, &[1.0]);
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        assert!(res < 1e-15);
    }

    #[test]
    fn identity_system_is_solved_exactly() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let (v, res) = min_norm_solve(&cols, &[0.0, 0.0, 0.25]);
        assert_eq!(v, vec![0.0, 0.0, 0.25]);
        assert_eq!(res, 0.0);
    }

    #[test]
    fn low_index_zeroes_redundant_columns() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let (v, res) = low_index_solve(&cols, &[2.0, 3.0], 1e-10);
        assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] - 3.0).abs() < 1e-12);
        assert_eq!(v[2], 0.0);
        assert!(res < 1e-12);
    }
}
