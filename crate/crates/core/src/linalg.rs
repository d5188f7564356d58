//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::{CMatrix, CVector, Error, Result, C64};

/// Cholesky factor `L` of a Hermitian positive-definite matrix, `S = L L†`.
pub fn cholesky(s: &CMatrix) -> Result<Cholesky<C64, Dyn>> {
    match Cholesky::new(s.clone()) {
        Some(c) => Ok(c),
        None => Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(s),
        }),
    }
}

pub fn min_eigenvalue(s: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(s));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| Error::Singular("lower-triangular solve".into()))
}

/// Solves `L† X = B` for lower-triangular `L`.
pub fn solve_lower_adjoint(l: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let u = l.adjoint();
    u.solve_upper_triangular(b)
        .ok_or_else(|| Error::Singular("upper-triangular solve".into()))
}

/// `L⁻¹ A L⁻†`.
pub fn congruence_inverse(l: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    let left = solve_lower(l, a)?;
    let right = solve_lower(l, &left.adjoint())?;
    Ok(right.adjoint())
}

/// Generalized Hermitian eigenproblem `H Ψ = E S Ψ`.
///
/// Returns ascending eigenvalues and S-orthonormal eigenvectors as columns.
/// Only the Hermitian part of `h` is used.
pub fn generalized_eigen(s: &CMatrix, h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let chol = cholesky(s)?;
    let l = chol.l();
    let reduced = hermitian_part(&congruence_inverse(&l, &hermitian_part(h))?);
    let eig = SymmetricEigen::new(reduced);
    let n = s.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        fix_phase(&mut v);
        u.set_column(col, &v);
    }
    let vectors = solve_lower_adjoint(&l, &u)?;
    Ok((values, vectors))
}

/// Rotates a vector so its largest-magnitude component is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, c) in v.iter().enumerate() {
        // Ties resolved toward the lowest index so the choice is deterministic.
        if c.norm() > best_norm * (1.0 + 1e-10) {
            best = i;
            best_norm = c.norm();
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / best_norm;
        *v *= phase;
    }
}

/// `a† S b`.
pub fn metric_inner(a: &CVector, s: &CMatrix, b: &CVector) -> C64 {
    a.dotc(&(s * b))
}

pub fn real_matrix(m: &CMatrix) -> nalgebra::DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn anti_hermitian_norm(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}
