//! Small dense complex helpers on top of nalgebra.
//!
//! Linear systems are only ever solved through a Cholesky factorization of a
//! Hermitian positive-definite matrix; no explicit inverse is formed.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Largest entry of `|A - A^H|`.
pub fn max_asymmetry(a: &CMat) -> f64 {
    let diff = a - a.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn fro_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Cholesky factor of the Hermitian part of `a`; `None` unless every pivot is
/// real and strictly positive (the complex factorization alone takes complex
/// square roots of negative pivots).
pub fn cholesky(a: &CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = Cholesky::new(hermitian_part(a))?;
    let l = chol.l_dirty();
    let ok = (0..a.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// Solves `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Option<CMat> {
    let chol = cholesky(a)?;
    let x = chol.solve(b);
    is_finite(&x).then_some(x)
}

/// `ln det A` for Hermitian positive-definite `A`.
pub fn logdet_hpd(a: &CMat) -> Option<f64> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        let d = l[(i, i)].re;
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn eigvals_hermitian(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    vals
}

pub fn lambda_min(a: &CMat) -> f64 {
    eigvals_hermitian(a).first().copied().unwrap_or(f64::NAN)
}

pub fn lambda_max(a: &CMat) -> f64 {
    eigvals_hermitian(a).last().copied().unwrap_or(f64::NAN)
}

/// Largest eigenvalue of `H^H H`, computed from whichever Gram matrix is smaller.
pub fn gram_lambda_max(h: &CMat) -> f64 {
    if h.nrows() <= h.ncols() {
        lambda_max(&(h * h.adjoint()))
    } else {
        lambda_max(&(h.adjoint() * h))
    }
}

pub(crate) fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}
