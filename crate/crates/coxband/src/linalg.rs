//! Small dense linear algebra: the solves and inverses needed for Newton
//! steps on a handful of parameters.

use ndarray::{Array1, Array2};

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot collapses (singular to working precision).
pub(crate) fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let p = b.len();
    debug_assert_eq!(a.nrows(), p);
    debug_assert_eq!(a.ncols(), p);
    let mut m = a.clone();
    let mut rhs = b.clone();

    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &k| m[[i, col]].abs().total_cmp(&m[[k, col]].abs()))?;
        if m[[pivot, col]].abs() < f64::EPSILON * p as f64 {
            return None;
        }
        if pivot != col {
            for c in 0..p {
                m.swap([col, c], [pivot, c]);
            }
            rhs.swap(col, pivot);
        }
        for r in col + 1..p {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for c in col..p {
                let v = m[[col, c]];
                m[[r, c]] -= f * v;
            }
            let v = rhs[col];
            rhs[r] -= f * v;
        }
    }

    let mut x = Array1::<f64>::zeros(p);
    for col in (0..p).rev() {
        let mut acc = rhs[col];
        for c in col + 1..p {
            acc -= m[[col, c]] * x[c];
        }
        x[col] = acc / m[[col, col]];
        if !x[col].is_finite() {
            return None;
        }
    }
    Some(x)
}

