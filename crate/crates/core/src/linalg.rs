//! Small dense matrix functions on symmetric matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenvalues at or below this are treated as a loss of positivity.
pub const POSITIVITY_FLOOR: f64 = 1e-14;

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

pub fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    (m - m.transpose()).amax()
}

pub fn eigen<T: Real>(m: &DMatrix<T>) -> SymmetricEigen<T, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    eigen(m).eigenvalues.min()
}

pub fn max_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    eigen(m).eigenvalues.max()
}

/// `m^s` for a symmetric positive definite `m`, via its eigendecomposition.
///
/// Fails instead of clamping when an eigenvalue is at or below the floor.
pub fn spd_power<T: Real>(m: &DMatrix<T>, s: T) -> Result<DMatrix<T>> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        if v <= T::lit(POSITIVITY_FLOOR) {
            return Err(Error::NotPositiveDefinite(v.to_f64_lossy()));
        }
        return Ok(DMatrix::from_element(1, 1, v.powf(s)));
    }
    let eig = eigen(m);
    let lo = eig.eigenvalues.min();
    if lo <= T::lit(POSITIVITY_FLOOR) {
        return Err(Error::NotPositiveDefinite(lo.to_f64_lossy()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(s)));
    Ok(symmetrize(
        &(&eig.eigenvectors * d * eig.eigenvectors.transpose()),
    ))
}

pub fn spd_sqrt<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    spd_power(m, T::lit(0.5))
}

pub fn spd_inverse<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    spd_power(m, -T::one())
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = eigen(m);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.exp()));
    symmetrize(&(&eig.eigenvectors * d * eig.eigenvectors.transpose()))
}

/// General inverse of a small square matrix.
pub fn inverse<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite(0.0))
}

/// Largest singular value.
pub fn op_norm<T: Real>(m: &DMatrix<T>) -> T {
    match (m.nrows(), m.ncols()) {
        (1, 1) => m[(0, 0)].abs(),
        (2, 2) => {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let f = a * a + b * b + c * c + d * d;
            let det = a * d - b * c;
            let disc = (f * f - T::lit(4.0) * det * det).max(T::zero());
            ((f + disc.sqrt()) * T::lit(0.5)).max(T::zero()).sqrt()
        }
        (r, c) if r == 1 || c == 1 => m.norm(),
        _ => {
            let g = m.transpose() * m;
            max_eigenvalue(&g).max(T::zero()).sqrt()
        }
    }
}

pub fn frobenius<T: Real>(m: &DMatrix<T>) -> T {
    m.norm()
}

/// Largest `c` with `a <= c b` tight, i.e. the top eigenvalue of `b^{-1/2} a b^{-1/2}`.
///
/// `b` must be symmetric positive definite; the reduction uses its Cholesky factor.
pub fn max_generalized_eigenvalue<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    Ok(generalized_eigenvalues(a, b)?.max())
}

pub fn min_generalized_eigenvalue<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    Ok(generalized_eigenvalues(a, b)?.min())
}

fn generalized_eigenvalues<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DVector<T>> {
    if b.nrows() == 1 {
        let bv = b[(0, 0)];
        if bv <= T::lit(POSITIVITY_FLOOR) {
            return Err(Error::NotPositiveDefinite(bv.to_f64_lossy()));
        }
        return Ok(DVector::from_element(1, a[(0, 0)] / bv));
    }
    let chol = nalgebra::Cholesky::new(symmetrize(b))
        .ok_or_else(|| Error::NotPositiveDefinite(min_eigenvalue(b).to_f64_lossy()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(b.nrows(), b.nrows()))
        .ok_or(Error::NotPositiveDefinite(0.0))?;
    let reduced = &linv * a * linv.transpose();
    Ok(eigen(&reduced).eigenvalues)
}

pub fn is_positive_definite<T: Real>(m: &DMatrix<T>) -> bool {
    min_eigenvalue(m) > T::lit(POSITIVITY_FLOOR)
}

/// `m^*`; the scalar field is real so this is the transpose.
#[inline]
pub fn adjoint<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    m.transpose()
}
