//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Dyn, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::{CMat, CVec, Error, Result};

/// Relative singular-value cutoff used for every numerical rank decision.
pub const RANK_RTOL: f64 = 1e-9;

/// Iteration cap for every SVD and symmetric eigen-decomposition.
/// nalgebra's defaults iterate without bound, which can spin forever on
/// badly scaled input.
pub const MAX_DECOMPOSITION_ITERS: usize = 10_000;

fn not_converged(what: &str, rows: usize, cols: usize) -> Error {
    Error::Numerical(format!("{what} of a {rows}x{cols} matrix did not converge"))
}

fn check_finite<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, what: &str) -> Result<()> {
    if a.iter().all(|z| z.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} of a non-finite matrix")))
    }
}

/// SVD with an iteration cap.
pub fn svd<T: ComplexField<RealField = f64>>(
    a: DMatrix<T>,
    compute_u: bool,
    compute_v: bool,
) -> Result<SVD<T, Dyn, Dyn>> {
    check_finite(&a, "SVD")?;
    let (r, c) = a.shape();
    SVD::try_new(a, compute_u, compute_v, 5.0 * f64::EPSILON, MAX_DECOMPOSITION_ITERS)
        .ok_or_else(|| not_converged("SVD", r, c))
}

fn sorted_eigen<T: ComplexField<RealField = f64>>(sym: DMatrix<T>) -> Result<(Vec<f64>, DMatrix<T>)> {
    check_finite(&sym, "eigen-decomposition")?;
    let n = sym.nrows();
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_DECOMPOSITION_ITERS)
        .ok_or_else(|| not_converged("eigen-decomposition", n, n))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, order.len(), |r, c| eig.eigenvectors[(r, order[c])].clone());
    Ok((values, vectors))
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending; eigenvectors are the matching columns.
pub fn hermitian_eig(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    sorted_eigen(hermitian_part(a))
}

/// Same as [`hermitian_eig`] for real symmetric matrices.
pub fn symmetric_eig(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    sorted_eigen((a + a.transpose()) * 0.5)
}

pub fn lambda_min(a: &CMat) -> Result<f64> {
    Ok(hermitian_eig(a)?.0.first().copied().unwrap_or(0.0))
}

pub fn lambda_max(a: &CMat) -> Result<f64> {
    Ok(hermitian_eig(a)?.0.last().copied().unwrap_or(0.0))
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Real representation `[[Re A, -Im A], [Im A, Re A]]`, so that
/// `s^H A s = s~^T R s~` for Hermitian `A` and `s~ = [Re s; Im s]`.
pub fn real_rep(a: &CMat) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Stack `[Re v; Im v]`.
pub fn to_real(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |i, _| if i < n { v[i].re } else { v[i - n].im })
}

/// Inverse of [`to_real`].
pub fn from_real(v: &DVector<f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(v[i], v[i + n]))
}

/// Numerical rank and an orthonormal basis (as columns) of the right
/// nullspace of a real matrix. Singular values `<= RANK_RTOL * s_max`
/// count as zero.
pub fn real_null_space(w: &DMatrix<f64>) -> Result<(usize, DMatrix<f64>)> {
    let cols = w.ncols();
    // nalgebra's thin SVD only returns `min(rows, cols)` right vectors.
    let padded = if w.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (w.nrows(), cols)).copy_from(w);
        p
    } else {
        w.clone()
    };
    let svd = svd(padded, false, true)?;
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = RANK_RTOL * s_max;
    let null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| s_max == 0.0 || svd.singular_values[i] <= cutoff)
        .collect();
    let rank = cols - null_rows.len();
    let basis = DMatrix::from_fn(cols, null_rows.len(), |r, c| v_t[(null_rows[c], r)]);
    Ok((rank, basis))
}

/// Numerical rank of a complex matrix.
pub fn complex_rank(a: &CMat) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    let sv = svd(a.clone(), false, false)?.singular_values;
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > RANK_RTOL * s_max).count())
}

/// Moore-Penrose pseudo-inverse with the crate-wide rank cutoff.
pub fn pinv(a: &CMat) -> Result<CMat> {
    let (r, c) = a.shape();
    if r == 0 || c == 0 {
        return Ok(CMat::zeros(c, r));
    }
    let svd = svd(a.clone(), true, true)?;
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return Ok(CMat::zeros(c, r));
    }
    svd.pseudo_inverse(RANK_RTOL * s_max).map_err(|e| Error::Numerical(e.to_string()))
}

/// Right nullspace of a complex matrix as orthonormal columns, ordered by
/// increasing singular value.
pub fn complex_null_space(a: &CMat) -> Result<CMat> {
    let cols = a.ncols();
    let padded = if a.nrows() < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = svd(padded, false, true)?;
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    let mut null_rows: Vec<usize> =
        (0..sv.len()).filter(|&i| s_max == 0.0 || sv[i] <= RANK_RTOL * s_max).collect();
    null_rows.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]).then(i.cmp(&j)));
    Ok(CMat::from_fn(cols, null_rows.len(), |r, c| v_t[(null_rows[c], r)].conj()))
}

/// Cholesky factor of a Hermitian positive definite matrix, or `None`.
///
/// nalgebra's complex factorisation takes complex square roots of negative
/// pivots instead of failing, so the pivots are checked here.
pub fn hermitian_cholesky(a: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = hermitian_part(a).cholesky()?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let p = l[(i, i)];
        if !(p.re > 0.0) || p.im.abs() > 1e-10 * p.re || !p.re.is_finite() {
            return None;
        }
    }
    Some(chol)
}

/// `x^H A x`, real part (exact for Hermitian `A`).
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    x.dotc(&(a * x)).re
}

pub fn inf_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Elementwise product.
pub fn hadamard(a: &CVec, b: &CVec) -> CVec {
    a.zip_map(b, |x, y| x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn real_rep_matches_quadratic_form() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, -1.0), c(0.5, 1.0), c(3.0, 0.0)]);
        let x = CVec::from_vec(vec![c(0.3, -0.7), c(-1.1, 0.4)]);
        let lhs = quad_form(&a, &x);
        let xr = to_real(&x);
        let rhs = (xr.transpose() * real_rep(&a) * &xr)[(0, 0)];
        assert!((lhs - rhs).abs() < 1e-12);
        assert_eq!(from_real(&xr), x);
    }

    #[test]
    fn eigenvalues_are_sorted() {
        let a = CMat::from_row_slice(2, 2, &[c(5.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(-1.0, 0.0)]);
        let (vals, _) = hermitian_eig(&a).unwrap();
        assert!(vals[0] < vals[1]);
        assert!((lambda_min(&a).unwrap() - vals[0]).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let (rank, basis) = real_null_space(&w).unwrap();
        assert_eq!(rank, 1);
        assert_eq!(basis.ncols(), 2);
        assert!((&w * &basis).norm() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let pd = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        assert!(hermitian_cholesky(&pd).is_some());
        let indef = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(1.0, 0.0)]);
        assert!(hermitian_cholesky(&indef).is_none());
        assert!(hermitian_cholesky(&(-CMat::identity(2, 2))).is_none());
    }

    #[test]
    fn complex_null_space_annihilates() {
        let a = CMat::from_row_slice(1, 2, &[c(1.0, 1.0), c(0.0, 2.0)]);
        let ns = complex_null_space(&a).unwrap();
        assert_eq!(ns.ncols(), 1);
        assert!((&a * &ns).norm() < 1e-12);
        assert_eq!(complex_rank(&a).unwrap(), 1);
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut a = CMat::identity(3, 3);
        a[(1, 2)] = c(f64::NAN, 0.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::Numerical(_))));
        assert!(matches!(pinv(&a), Err(Error::Numerical(_))));
        let mut w = DMatrix::<f64>::identity(2, 4);
        w[(0, 3)] = f64::INFINITY;
        assert!(matches!(real_null_space(&w), Err(Error::Numerical(_))));
    }
}
