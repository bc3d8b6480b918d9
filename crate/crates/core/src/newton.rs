//! Damped Newton iteration on small dense systems, with a finite-difference
//! Jacobian and partial-pivot Gaussian elimination.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NewtonError {
    #[error("Jacobian is singular at iteration {iter}")]
    Singular { iter: usize },
    #[error("residual evaluation failed: {0}")]
    Eval(String),
    #[error(
        "no convergence after {iterations} iterations; best residual {best_residual:.3e}"
    )]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
        /// Best point reached.
        best_x: Vec<f64>,
        /// `(iteration, residual norm)` history for diagnostics.
        trace: Vec<(usize, f64)>,
    },
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in row + 1..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative step for the central-difference Jacobian.
    pub fd_step_rel: f64,
    /// Smallest damping factor before the step counts as failed.
    pub damping_min: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            fd_step_rel: 1e-6,
            damping_min: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton: full steps halved until the residual norm decreases.
///
/// `residual` may return `Err` for out-of-domain inputs; the line search
/// treats that like a residual increase and halves the step.
pub fn newton_damped<F>(
    residual: F,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonResult, NewtonError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, String>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x).map_err(NewtonError::Eval)?;
    assert_eq!(r.len(), n, "square system required");
    let mut rnorm = norm(&r);
    let mut history = vec![(0usize, rnorm)];

    for iter in 1..=opts.max_iter {
        if rnorm <= opts.tol {
            return Ok(NewtonResult { x, residual_norm: rnorm, iterations: iter - 1 });
        }

        // Central-difference Jacobian, column by column.
        let mut jac = vec![vec![0.0; n]; n];
        for col in 0..n {
            let step = opts.fd_step_rel * x[col].abs().max(1e-4);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[col] += step;
            xm[col] -= step;
            match (residual(&xp), residual(&xm)) {
                (Ok(rp), Ok(rm)) => {
                    for row in 0..n {
                        jac[row][col] = (rp[row] - rm[row]) / (2.0 * step);
                    }
                }
                (Ok(rp), Err(_)) => {
                    for row in 0..n {
                        jac[row][col] = (rp[row] - r[row]) / step;
                    }
                }
                (Err(_), Ok(rm)) => {
                    for row in 0..n {
                        jac[row][col] = (r[row] - rm[row]) / step;
                    }
                }
                (Err(e), Err(_)) => return Err(NewtonError::Eval(e)),
            }
        }

        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_dense(&mut jac, &mut rhs).ok_or(NewtonError::Singular { iter })?;

        let mut lambda = 1.0;
        let mut advanced = false;
        while lambda >= opts.damping_min {
            let cand: Vec<f64> = x
                .iter()
                .zip(&delta)
                .map(|(xi, di)| xi + lambda * di)
                .collect();
            if let Ok(rc) = residual(&cand) {
                let rc_norm = norm(&rc);
                if rc_norm < rnorm || rc_norm <= opts.tol {
                    x = cand;
                    r = rc;
                    rnorm = rc_norm;
                    advanced = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        history.push((iter, rnorm));
        if !advanced {
            return Err(NewtonError::NoConvergence {
                iterations: iter,
                best_residual: rnorm,
                best_x: x,
                trace: history,
            });
        }
    }

    if rnorm <= opts.tol {
        Ok(NewtonResult { x, residual_norm: rnorm, iterations: opts.max_iter })
    } else {
        Err(NewtonError::NoConvergence {
            iterations: opts.max_iter,
            best_residual: rnorm,
            best_x: x,
            trace: history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_linear_system() {
        let mut a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let mut b = vec![5.0, 10.0];
        let x = solve_dense(&mut a, &mut b).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let mut a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut b = vec![1.0, 2.0];
        assert!(solve_dense(&mut a, &mut b).is_none());
    }

    #[test]
    fn newton_on_intersecting_curves() {
        // x^2 + y^2 = 4, x y = 1.
        let residual = |v: &[f64]| -> Result<Vec<f64>, String> {
            Ok(vec![v[0] * v[0] + v[1] * v[1] - 4.0, v[0] * v[1] - 1.0])
        };
        let sol = newton_damped(residual, &[2.0, 0.3], &NewtonOptions::default()).unwrap();
        assert!(sol.residual_norm < 1e-10);
        let (x, y) = (sol.x[0], sol.x[1]);
        assert_relative_eq!(x * x + y * y, 4.0, epsilon = 1e-9);
        assert_relative_eq!(x * y, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn newton_reports_failure_with_trace() {
        // exp(x) = 0 has no root; the residual decays but never reaches tol.
        let residual = |v: &[f64]| -> Result<Vec<f64>, String> { Ok(vec![v[0].exp()]) };
        let err = newton_damped(residual, &[1.0], &NewtonOptions { max_iter: 15, ..Default::default() });
        match err {
            Err(NewtonError::NoConvergence { trace, best_residual, .. }) => {
                assert!(trace.len() > 10);
                assert!(best_residual > 1e-10);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }
}
