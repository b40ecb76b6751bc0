use serde::Serialize;

use super::{bmo_original, condition_b, condition_c, BmoReport, WeightPair};
use crate::dyadic::Grid;
use crate::error::{Error, Result};
use crate::fields::{ap_characteristic_in_window, direction_net, Field};
use crate::linalg;
use crate::scalar::Real;
use crate::transforms::HaarSpectrum;

/// Outcome of building `W = (U^* Λ^{2/p} U)^{p/2}` and testing `U` against
/// the pair `(Λ, W)`.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub p: f64,
    /// Largest gap between `|Λ^{1/p} U e|` and `|W^{1/p} e|` over leaves and
    /// unit test directions, relative to `‖W^{1/p}‖` on the leaf.
    pub identity_error: f64,
    pub identity_ok: bool,
    pub ap_w: f64,
    pub ap_witness: String,
    /// `bmo_original(U, Λ, W, p, ε)`.
    pub bmo: BmoReport,
}

/// `W = (U^* Λ^{2/p} U)^{p/2}` leaf by leaf.
pub fn theorem_weight<T: Real>(lambda: &Field<T>, u: &Field<T>, p: T) -> Result<Field<T>> {
    lambda.same_window(u)?;
    if u.rows() != u.cols() || u.rows() != lambda.rows() {
        return Err(Error::Mismatch("U must be square and match Λ".into()));
    }
    let two_p = T::lit(2.0) / p;
    let leaves = lambda
        .leaves()
        .iter()
        .zip(u.leaves())
        .map(|(l, m)| {
            let inner = m.transpose() * linalg::spd_power(l, two_p)? * m;
            let scale = inner.amax().max(T::one());
            let asym = linalg::asymmetry(&inner);
            if asym > T::lit(1e-10) * scale {
                return Err(Error::NotSymmetric(asym.to_f64_lossy()));
            }
            linalg::spd_power(&linalg::symmetrize(&inner), p / T::lit(2.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Field::new(lambda.window().clone(), leaves)
}

pub fn matrix_weight_theorem_pipeline<T: Real>(
    lambda: &Field<T>,
    u: &Field<T>,
    p: T,
    eps: T,
) -> Result<(Field<T>, PipelineReport)> {
    let w = theorem_weight(lambda, u, p)?;
    let n = u.rows();
    let mut dirs = direction_net::<T>(n);
    dirs.extend(
        (0..n).map(|i| {
            nalgebra::DVector::from_fn(n, |k, _| if k == i { T::one() } else { T::zero() })
        }),
    );
    let mut err = T::zero();
    for ((l, m), wl) in lambda.leaves().iter().zip(u.leaves()).zip(w.leaves()) {
        let lp = linalg::spd_power(l, p.recip())?;
        let wp = linalg::spd_power(wl, p.recip())?;
        let scale = linalg::op_norm(&wp).max(T::lit(1e-300));
        for e in &dirs {
            let a = (&lp * m * e).norm();
            let b = (&wp * e).norm();
            err = err.max((a - b).abs() / scale);
        }
    }
    let ap = ap_characteristic_in_window(&w, p, None)?;
    let bmo = bmo_original(u, lambda, &w, p, eps)?;
    let report = PipelineReport {
        p: p.to_f64_lossy(),
        identity_error: err.to_f64_lossy(),
        identity_ok: err <= T::lit(1e-10),
        ap_w: ap.value.to_f64_lossy(),
        ap_witness: ap.witness.address(),
        bmo,
    };
    Ok((w, report))
}

/// Values of the main quantities on one shifted grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridValues {
    pub grid: Grid,
    pub depth: u32,
    pub bmo_original: f64,
    pub condition_b: f64,
    pub condition_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftedGridReport {
    pub p: f64,
    pub epsilon: f64,
    pub grids: Vec<GridValues>,
    pub max_bmo_original: f64,
    pub max_condition_b: f64,
    pub max_condition_c: f64,
    /// Each quantity is zero on every grid or positive on every grid.
    pub finiteness_agrees: bool,
}

/// Re-evaluates the quantities on every shifted grid, each restricted to the
/// largest window of that grid inside the original root.
pub fn bmo_over_shifted_grids<T: Real>(
    b: &Field<T>,
    w: &Field<T>,
    u: &Field<T>,
    p: T,
    eps: T,
) -> Result<ShiftedGridReport> {
    let dim = w.window().dim();
    let mut grids = Vec::new();
    for grid in Grid::all(dim) {
        let (bg, wg, ug) = (b.on_grid(grid)?, w.on_grid(grid)?, u.on_grid(grid)?);
        let pair = WeightPair::new(&wg, &ug, p)?;
        let bs = HaarSpectrum::analyze(&bg);
        grids.push(GridValues {
            grid,
            depth: wg.window().depth(),
            bmo_original: bmo_original(&bg, &wg, &ug, p, eps)?.supremum,
            condition_b: condition_b(&pair, &bs)?.supremum,
            condition_c: condition_c(&pair, &bs)?.sum.supremum,
        });
    }
    let max = |f: fn(&GridValues) -> f64| grids.iter().map(f).fold(0.0, f64::max);
    let agrees = |f: fn(&GridValues) -> f64| {
        let tol = 1e-12 * max(f).max(1.0);
        let zeros = grids.iter().filter(|g| f(g) <= tol).count();
        zeros == 0 || zeros == grids.len()
    };
    Ok(ShiftedGridReport {
        p: p.to_f64_lossy(),
        epsilon: eps.to_f64_lossy(),
        max_bmo_original: max(|g| g.bmo_original),
        max_condition_b: max(|g| g.condition_b),
        max_condition_c: max(|g| g.condition_c),
        finiteness_agrees: agrees(|g| g.bmo_original)
            && agrees(|g| g.condition_b)
            && agrees(|g| g.condition_c),
        grids,
    })
}
