use nalgebra::DMatrix;

use super::{accumulate_down, HaarSpectrum};
use crate::dyadic::Signature;
use crate::error::{Error, Result};
use crate::fields::{Field, ReducingTable};
use crate::linalg;
use crate::scalar::Real;

fn check_product<T: Real>(b: &Field<T>, f: &Field<T>) -> Result<()> {
    b.same_window(f)?;
    if b.cols() != f.rows() {
        return Err(Error::Mismatch(format!(
            "symbol has {} columns but the function has {} rows",
            b.cols(),
            f.rows()
        )));
    }
    Ok(())
}

/// `π_B f = Σ_I Σ_ε B_I^ε (m_I f) h_I^ε`.
pub fn paraproduct<T: Real>(b: &Field<T>, f: &Field<T>) -> Result<Field<T>> {
    check_product(b, f)?;
    Ok(paraproduct_spectrum(&HaarSpectrum::analyze(b), f).synthesize())
}

/// Spectrum of `π_B f` from the spectrum of `B`.
pub fn paraproduct_spectrum<T: Real>(b: &HaarSpectrum<T>, f: &Field<T>) -> HaarSpectrum<T> {
    let avg = f.averages();
    b.map_coeffs(|id, _, m| m * avg.get(id))
}

/// `Σ_I Σ_ε V_I(W) A_I^ε m_I(U^{-1/p} f) h_I^ε`, with `p` taken from the
/// primal table of `W`.
pub fn conjugated_paraproduct<T: Real>(
    a: &HaarSpectrum<T>,
    vw: &ReducingTable<T>,
    u: &Field<T>,
    f: &Field<T>,
) -> Result<Field<T>> {
    if vw.is_dual() {
        return Err(Error::InvalidParameter(
            "conjugated paraproduct needs a primal table".into(),
        ));
    }
    u.same_window(f)?;
    if a.window() != f.window() || vw.window() != f.window() {
        return Err(Error::Mismatch(
            "coefficients, table and function windows differ".into(),
        ));
    }
    let g = u.pointwise_power(-vw.p().recip())?.mul(f)?;
    let avg = g.averages();
    Ok(a.map_coeffs(|id, _, m| vw.get(id) * m * avg.get(id))
        .synthesize())
}

/// `(π_{B*})* f = Σ_I Σ_ε B_I^ε f_I^ε χ_I / |I|`.
pub fn dual_paraproduct<T: Real>(b: &Field<T>, f: &Field<T>) -> Result<Field<T>> {
    check_product(b, f)?;
    Ok(dual_paraproduct_spectra(
        &HaarSpectrum::analyze(b),
        &HaarSpectrum::analyze(f),
    ))
}

pub(crate) fn dual_paraproduct_spectra<T: Real>(
    b: &HaarSpectrum<T>,
    f: &HaarSpectrum<T>,
) -> Field<T> {
    let win = b.window().clone();
    let dim = win.dim();
    accumulate_down(&win, b.rows(), f.cols(), |id| {
        let mut acc = DMatrix::zeros(b.rows(), f.cols());
        for eps in Signature::cancellative(dim) {
            acc += b.get(id, eps) * f.get(id, eps);
        }
        acc / win.volume::<T>(id.level)
    })
}

/// `T_A f = Σ_I Σ_ε A_I^ε f_I^ε h_I^ε`; the root average of `f` is dropped.
pub fn haar_multiplier<T: Real>(a: &HaarSpectrum<T>, f: &Field<T>) -> Result<Field<T>> {
    if a.window() != f.window() || a.cols() != f.rows() {
        return Err(Error::Mismatch(
            "multiplier and function do not match".into(),
        ));
    }
    let fs = HaarSpectrum::analyze(f);
    Ok(fs.map_coeffs(|id, eps, m| a.get(id, eps) * m).synthesize())
}

/// `M_U Φ = Σ_I Σ_ε Φ_I^ε (m_I U)^{1/2} h_I^ε`.
pub fn mu_multiplier<T: Real>(u: &Field<T>, phi: &Field<T>) -> Result<Field<T>> {
    Ok(mu_multiplier_spectrum(u, phi)?.synthesize())
}

pub(crate) fn mu_multiplier_spectrum<T: Real>(
    u: &Field<T>,
    phi: &Field<T>,
) -> Result<HaarSpectrum<T>> {
    u.same_window(phi)?;
    u.check_weight()?;
    let avg = u.averages();
    let win = u.window();
    let roots = win
        .interior_cubes()
        .map(|id| linalg::spd_sqrt(avg.get(id)))
        .collect::<Result<Vec<_>>>()?;
    let fs = HaarSpectrum::analyze(phi);
    Ok(fs.map_coeffs(|id, _, m| m * &roots[win.linear(id)]))
}
