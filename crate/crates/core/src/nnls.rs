//! Lawson-Hanson active-set solver for `min |A x - y|` subject to `x >= 0`.

use nalgebra::{DMatrix, DVector};

/// Nonnegative least-squares solution.
pub(crate) fn nnls(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) * y.amax().max(1.0);
    let tol = 1e-12 * scale * (a.nrows().max(n) as f64);

    let mut w = a.tr_mul(&(y - a * &x));
    for _ in 0..3 * n + 10 {
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let s = solve_passive(a, y, &passive);
            let blocking: Vec<usize> = (0..n).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if blocking.is_empty() {
                x = s;
                break;
            }
            let alpha = blocking.iter().map(|&i| x[i] / (x[i] - s[i])).fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        w = a.tr_mul(&(y - a * &x));
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, y: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let mut s = DVector::zeros(passive.len());
    if cols.is_empty() {
        return s;
    }
    let sub = a.select_columns(&cols);
    let sol = sub.svd(true, true).solve(y, 1e-13).expect("svd computed with both factors");
    for (k, &i) in cols.iter().enumerate() {
        s[i] = sol[k];
    }
    s
}
