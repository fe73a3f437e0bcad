//! Internal linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares of `y` on the columns of `x`, solved through the
/// normal equations with a Cholesky factorization.
///
/// Returns the coefficient vector, residuals, the residual variance
/// SSR/(n − k), and the unscaled inverse moment matrix (XᵀX)⁻¹ from which
/// coefficient covariance follows as `sigma2 * xtx_inv`.
pub(crate) struct OlsSolution {
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sigma2: f64,
    pub xtx_inv: DMatrix<f64>,
}

pub(crate) fn ols_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsSolution> {
    let n = x.nrows();
    let k = x.ncols();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            context: "ols design/response",
            left: n,
            right: y.len(),
        });
    }
    if n <= k {
        return Err(Error::SeriesTooShort {
            context: "ols",
            len: n,
            min: k + 1,
        });
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = nalgebra::Cholesky::new(xtx.clone()).ok_or_else(|| {
        let cond = condition_number(&xtx);
        Error::NearSingular {
            context: "ols normal equations",
            condition: cond,
        }
    })?;
    let coef = chol.solve(&xty);
    let xtx_inv = chol.inverse();
    let residuals = y - x * &coef;
    let ssr = residuals.dot(&residuals);
    let sigma2 = ssr / (n - k) as f64;
    Ok(OlsSolution {
        coef,
        residuals,
        sigma2,
        xtx_inv,
    })
}

/// 2-norm condition number estimate via singular values.
pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the discrete Lyapunov equation P = T P Tᵀ + Q by the
/// vectorization identity (I − T⊗T) vec(P) = vec(Q).
///
/// Intended for small state dimensions (the ARMA state never exceeds 6),
/// where the m²×m² dense solve is trivial.
pub(crate) fn solve_discrete_lyapunov(t: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = t.nrows();
    assert_eq!(t.ncols(), m);
    assert_eq!(q.nrows(), m);
    assert_eq!(q.ncols(), m);
    let mm = m * m;
    let mut a = DMatrix::<f64>::identity(mm, mm);
    // Kronecker product T ⊗ T subtracted from the identity.
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    // vec is column-major: entry (col j, row i) of P sits at j*m + i.
                    a[(j * m + i, l * m + k)] -= t[(i, k)] * t[(j, l)];
                }
            }
        }
    }
    let mut b = DVector::<f64>::zeros(mm);
    for j in 0..m {
        for i in 0..m {
            b[j * m + i] = q[(i, j)];
        }
    }
    let lu = a.lu();
    let p_vec = lu.solve(&b).ok_or(Error::NearSingular {
        context: "discrete lyapunov equation",
        condition: f64::INFINITY,
    })?;
    let mut p = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            p[(i, j)] = p_vec[j * m + i];
        }
    }
    // Symmetrize against round-off.
    let pt = p.transpose();
    Ok((&p + &pt) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ols_recovers_exact_linear_relation() {
        // y = 2 + 3x without noise; coefficients must come back exactly.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut x = DMatrix::zeros(5, 2);
        let mut y = DVector::zeros(5);
        for (i, &xi) in xs.iter().enumerate() {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = xi;
            y[i] = 2.0 + 3.0 * xi;
        }
        let sol = ols_solve(&x, &y).unwrap();
        assert_relative_eq!(sol.coef[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(sol.coef[1], 3.0, epsilon = 1e-10);
        assert!(sol.sigma2 < 1e-20);
    }

    #[test]
    fn lyapunov_solution_satisfies_equation() {
        let t = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 0.3]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0]);
        let p = solve_discrete_lyapunov(&t, &q).unwrap();
        let rhs = &t * &p * t.transpose() + &q;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(p[(i, j)], rhs[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lyapunov_scalar_case_matches_closed_form() {
        // p = t²p + q  =>  p = q / (1 − t²).
        let t = DMatrix::from_element(1, 1, 0.8);
        let q = DMatrix::from_element(1, 1, 1.0);
        let p = solve_discrete_lyapunov(&t, &q).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0 / (1.0 - 0.64), epsilon = 1e-12);
    }
}
