//! Non-negative least squares (Lawson–Hanson) and a minimum-norm
//! refinement over the feasible set `{x >= 0 : A x = b}`.

use nalgebra::{DMatrix, DVector};

const SVD_EPS: f64 = 1e-13;

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])])
}

fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone()
        .svd(true, true)
        .solve(b, SVD_EPS)
        .expect("svd computed with both factors")
}

/// `argmin ||A x - b||` subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + a.norm() * b.norm());

    for _ in 0..3 * n + 3 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;

        for _ in 0..3 * n + 3 {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let s_p = lstsq(&columns(a, &idx), b);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = s_p[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - s_p[k]));
                }
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (s_p[k] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    x
}

/// Starting from a feasible `x0` (`A x0 = b`, `x0 >= 0`), finds the
/// minimum-norm point of the same feasible set with a primal active-set
/// method.
pub fn min_norm_refine(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = x0.map(|v| v.max(0.0));
    let mut free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();

    for _ in 0..10 * n {
        let idx: Vec<usize> = (0..n).filter(|&j| free[j]).collect();
        let mut p = DVector::zeros(n);
        if !idx.is_empty() {
            let p_f = lstsq(&columns(a, &idx), b);
            for (k, &j) in idx.iter().enumerate() {
                p[j] = p_f[k];
            }
        }

        if idx.iter().all(|&j| p[j] >= 0.0) {
            x = p;
            // Multipliers of the active bounds: mu = -(A^T y), x_F = A_F^T y.
            if idx.is_empty() {
                break;
            }
            let a_f = columns(a, &idx);
            let x_f = DVector::from_iterator(idx.len(), idx.iter().map(|&j| x[j]));
            let y = lstsq(&a_f.transpose(), &x_f);
            let aty = a.transpose() * y;
            let release = (0..n)
                .filter(|&j| !free[j] && aty[j] > 1e-12)
                .max_by(|&i, &j| aty[i].total_cmp(&aty[j]));
            match release {
                Some(j) => free[j] = true,
                None => break,
            }
        } else {
            let mut alpha: f64 = 1.0;
            let mut blocking = None;
            for &j in &idx {
                if p[j] < 0.0 {
                    let a = x[j] / (x[j] - p[j]);
                    if a < alpha {
                        alpha = a;
                        blocking = Some(j);
                    }
                }
            }
            for &j in &idx {
                x[j] += alpha * (p[j] - x[j]);
                if x[j] <= 1e-15 {
                    x[j] = 0.0;
                    free[j] = false;
                }
            }
            if let Some(j) = blocking {
                x[j] = 0.0;
                free[j] = false;
            }
        }
    }
    x.map(|v| v.max(0.0))
}
