//! Thin helpers over nalgebra's Cholesky factorisation.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Chol = Cholesky<f64, Dyn>;

pub fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Chol> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} has non-finite entries")));
    }
    Cholesky::new(m).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub fn log_det(chol: &Chol) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `vᵀ M⁻¹ v` using the factor of `M`.
pub fn inv_quad_form(chol: &Chol, v: &DVector<f64>) -> f64 {
    let z = chol
        .l_dirty()
        .solve_lower_triangular(v)
        .expect("Cholesky factor has a nonzero diagonal");
    z.norm_squared()
}

/// Log density of `N(0, M)` at `v`.
pub fn mvn_logpdf_zero_mean(chol: &Chol, v: &DVector<f64>) -> f64 {
    let n = v.len() as f64;
    -0.5 * (inv_quad_form(chol, v) + log_det(chol) + n * (2.0 * std::f64::consts::PI).ln())
}

pub fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw `N(0, M)` with `M = L Lᵀ`.
pub fn sample_from_cov_chol<R: Rng + ?Sized>(chol: &Chol, rng: &mut R) -> DVector<f64> {
    let z = standard_normals(chol.l_dirty().nrows(), rng);
    lower_mul(chol, &z)
}

/// Draw `N(0, P⁻¹)` from the factor of the precision `P = L Lᵀ`: solves `Lᵀ x = z`.
pub fn sample_from_precision_chol<R: Rng + ?Sized>(chol: &Chol, rng: &mut R) -> DVector<f64> {
    let z = standard_normals(chol.l_dirty().nrows(), rng);
    chol.l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a nonzero diagonal")
}

/// `L z` using only the lower triangle of the stored factor.
pub fn lower_mul(chol: &Chol, z: &DVector<f64>) -> DVector<f64> {
    let l = chol.l_dirty();
    let n = z.len();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[(i, j)] * z[j];
        }
        out[i] = acc;
    }
    out
}

pub fn inverse_from_chol(chol: &Chol) -> DMatrix<f64> {
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    inv
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
