use nalgebra::DMatrix;

use super::{accumulate_down, HaarSpectrum};
use crate::dyadic::Signature;
use crate::error::{Error, Result};
use crate::fields::{Field, ReducingTable};
use crate::scalar::Real;

/// `S f(x) = (Σ_I Σ_ε ‖f_I^ε‖² χ_I(x) / |I|)^{1/2}`, Frobenius norms.
pub fn dyadic_square_function<T: Real>(f: &Field<T>) -> Field<T> {
    let s = HaarSpectrum::analyze(f);
    let win = f.window().clone();
    let dim = win.dim();
    accumulate_down(&win, 1, 1, |id| {
        let mut acc = T::zero();
        for eps in Signature::cancellative(dim) {
            acc += s.get(id, eps).norm_squared();
        }
        DMatrix::from_element(1, 1, acc / win.volume::<T>(id.level))
    })
    .map(|m| m.map(|v| v.sqrt()))
}

/// `S_W Φ(x) = (Σ_I Σ_ε ‖W^{1/2}(x) Φ_I^ε‖² χ_I(x) / |I|)^{1/2}`.
pub fn weighted_square_function<T: Real>(w: &Field<T>, phi: &Field<T>) -> Result<Field<T>> {
    weighted_square_function_of(w, &HaarSpectrum::analyze(phi))
}

/// [`weighted_square_function`] from coefficients. Uses
/// `‖W^{1/2} Φ‖_F² = tr(W Φ Φᵀ)`.
pub fn weighted_square_function_of<T: Real>(
    w: &Field<T>,
    phi: &HaarSpectrum<T>,
) -> Result<Field<T>> {
    if w.window() != phi.window() || w.cols() != phi.rows() {
        return Err(Error::Mismatch(
            "weight and coefficients do not match".into(),
        ));
    }
    let win = w.window().clone();
    let dim = win.dim();
    let gram = accumulate_down(&win, phi.rows(), phi.rows(), |id| {
        let mut acc = DMatrix::zeros(phi.rows(), phi.rows());
        for eps in Signature::cancellative(dim) {
            let m = phi.get(id, eps);
            acc += m * m.transpose();
        }
        acc / win.volume::<T>(id.level)
    });
    gram.zip_map(w, |g, w| {
        DMatrix::from_element(1, 1, w.dot(g).max(T::zero()).sqrt())
    })
}

/// `∫ (Σ_I Σ_ε |V_I(W) f_I^ε|² χ_I / |I|)^{p/2}` for the primal table of `(W, p)`.
pub fn triebel_lizorkin_functional<T: Real>(table: &ReducingTable<T>, f: &Field<T>) -> Result<T> {
    if table.is_dual() || table.window() != f.window() {
        return Err(Error::Mismatch(
            "needs the primal table on the function's window".into(),
        ));
    }
    let s = HaarSpectrum::analyze(f);
    let win = f.window().clone();
    let dim = win.dim();
    let sum = accumulate_down(&win, 1, 1, |id| {
        let v = table.get(id);
        let mut acc = T::zero();
        for eps in Signature::cancellative(dim) {
            acc += (v * s.get(id, eps)).norm_squared();
        }
        DMatrix::from_element(1, 1, acc / win.volume::<T>(id.level))
    });
    let half = table.p() / T::lit(2.0);
    let mut total = T::zero();
    for m in sum.leaves() {
        total += m[(0, 0)].powf(half);
    }
    Ok(total * win.leaf_volume::<T>())
}
