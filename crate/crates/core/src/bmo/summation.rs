use nalgebra::DMatrix;
use serde::Serialize;

use super::{per_cube, subtree_sums, BmoReport};
use crate::dyadic::Signature;
use crate::error::Result;
use crate::fields::Field;
use crate::linalg;
use crate::scalar::Real;
use crate::transforms::HaarSpectrum;

/// Square-sum conditions on a weight's own Haar coefficients at `p = 2`.
#[derive(Clone, Debug, Serialize)]
pub struct SummationReport {
    /// `|J|^{-1} Σ_{I ⊆ J} Σ_ε ‖(m_I W)^{-1/2} W_I^ε (m_I W)^{-1/2}‖²`.
    pub fkp: BmoReport,
    /// Smallest `C_J` with `Σ_{I ⊆ J} Σ_ε W_I^ε (m_I W)^{-1} W_I^ε ≼ C_J |J| m_J W`.
    pub buckley: BmoReport,
    /// Smallest `C_J` with
    /// `|J|^{-1} Σ m_I(W^{-1}) W_I^ε m_I(W^{-1}) W_I^ε m_I(W^{-1}) ≼ C_J m_J(W^{-1})`.
    pub summation: BmoReport,
    /// Smallest generalized eigenvalue of `C |J| m_J W - Σ(...)` against
    /// `m_J W`, over `J`, with `C` the reported Buckley supremum.
    pub buckley_slack: f64,
}

impl SummationReport {
    /// The Buckley ordering holds with the reported constant.
    pub fn buckley_ok(&self) -> bool {
        self.buckley_slack >= -1e-10
    }
}

pub fn buckley_fkp_summation<T: Real>(w: &Field<T>) -> Result<SummationReport> {
    w.check_weight()?;
    let win = w.window().clone();
    let n = w.rows();
    let dim = win.dim();
    let ws = HaarSpectrum::analyze(w);
    let wa = w.averages();
    let wia = w.inverse()?.averages();
    let count = win.cube_count();
    let mut fkp_own = vec![T::zero(); count];
    let mut buck_own = vec![DMatrix::<T>::zeros(n, n); count];
    let mut sum_own = vec![DMatrix::<T>::zeros(n, n); count];
    for id in win.interior_cubes() {
        let lin = win.linear(id);
        let m = wa.get(id);
        let isq = linalg::spd_power(m, T::lit(-0.5))?;
        let inv = linalg::spd_inverse(m)?;
        let mi = wia.get(id);
        for e in Signature::cancellative(dim) {
            let c = ws.get(id, e);
            fkp_own[lin] += linalg::op_norm(&(&isq * c * &isq)).powi(2);
            buck_own[lin] += c * &inv * c;
            sum_own[lin] += mi * c * mi * c * mi;
        }
    }
    let fkp_sum = subtree_sums(&win, fkp_own, |a, b| *a += *b);
    let buck_sum = subtree_sums(&win, buck_own, |a, b| *a += b);
    let sum_sum = subtree_sums(&win, sum_own, |a, b| *a += b);

    let fkp = per_cube(&win, |j| {
        Ok(fkp_sum[win.linear(j)] / win.volume::<T>(j.level))
    })?;
    let buckley = per_cube(&win, |j| {
        let g = linalg::symmetrize(&buck_sum[win.linear(j)]);
        let rhs = wa.get(j) * win.volume::<T>(j.level);
        Ok(linalg::max_generalized_eigenvalue(&g, &rhs)?.max(T::zero()))
    })?;
    let summation = per_cube(&win, |j| {
        let g = linalg::symmetrize(&sum_sum[win.linear(j)]) / win.volume::<T>(j.level);
        Ok(linalg::max_generalized_eigenvalue(&g, wia.get(j))?.max(T::zero()))
    })?;
    let buckley = BmoReport::new("buckley", 2.0, &win, buckley);
    let c = T::lit(buckley.supremum);
    let slack = per_cube(&win, |j| {
        let m = wa.get(j) * win.volume::<T>(j.level);
        let gap = &m * c - linalg::symmetrize(&buck_sum[win.linear(j)]);
        linalg::min_generalized_eigenvalue(&linalg::symmetrize(&gap), &m)
    })?;
    Ok(SummationReport {
        fkp: BmoReport::new("fkp", 2.0, &win, fkp),
        buckley,
        summation: BmoReport::new("summation", 2.0, &win, summation),
        buckley_slack: slack.into_iter().fold(f64::INFINITY, f64::min),
    })
}
