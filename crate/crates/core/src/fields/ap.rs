use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

use super::Field;
use crate::dyadic::{CubeId, DyadicCube, Grid};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// A window supremum of the matrix `A_p` characteristic with the cube that
/// attains it.
#[derive(Clone, Debug)]
pub struct ApReport<T: Real> {
    pub p: T,
    pub value: T,
    pub witness: DyadicCube,
    pub grid: Grid,
}

pub(crate) fn check_exponent<T: Real>(p: T) -> Result<()> {
    if !(p > T::one()) || !p.is_finite() {
        return Err(Error::ExponentOutOfRange(p.to_f64_lossy()));
    }
    Ok(())
}

/// Conjugate exponent `p' = p / (p - 1)`.
pub fn conjugate<T: Real>(p: T) -> T {
    p / (p - T::one())
}

fn norm2<T: Real>(m: &Matrix2<T>) -> T {
    let s = m.norm_squared();
    let det = m.determinant();
    let disc = (s * s - T::lit(4.0) * det * det).max(T::zero());
    ((s + disc.sqrt()) / T::lit(2.0)).sqrt()
}

/// The characteristic
/// `sup_I ⨍_I (⨍_I ‖W^{1/p}(x) W^{-1/p}(t)‖^{p'} dt)^{p/p'} dx`
/// over cubes of the field's own window, evaluated exactly on leaves.
///
/// `max_level` limits the cubes to those at most that many levels below the
/// root.
pub fn ap_characteristic_in_window<T: Real>(
    w: &Field<T>,
    p: T,
    max_level: Option<u32>,
) -> Result<ApReport<T>> {
    check_exponent(p)?;
    w.check_weight()?;
    let win = w.window();
    let n = w.rows();
    let pp = conjugate(p);
    let outer = p - T::one();
    let depth = win.depth();
    let top = max_level.unwrap_or(depth).min(depth);
    let d = win.dim() as u32;
    let count = win.leaf_count();

    let pos = w.pointwise_power(p.recip())?;
    let neg = w.pointwise_power(-p.recip())?;
    let kernel: Box<dyn Fn(usize, usize) -> T + Sync> = match n {
        1 => {
            let a: Vec<T> = pos.leaves().iter().map(|m| m[(0, 0)]).collect();
            let b: Vec<T> = neg.leaves().iter().map(|m| m[(0, 0)]).collect();
            Box::new(move |x, t| (a[x] * b[t]).powf(pp))
        }
        2 => {
            let to2 = |m: &DMatrix<T>| Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let a: Vec<Matrix2<T>> = pos.leaves().iter().map(to2).collect();
            let b: Vec<Matrix2<T>> = neg.leaves().iter().map(to2).collect();
            Box::new(move |x, t| norm2(&(a[x] * b[t])).powf(pp))
        }
        _ => Box::new(move |x, t| linalg::op_norm(&(pos.leaf(x) * neg.leaf(t))).powf(pp)),
    };

    // For each x, the inner average over every ancestor cube of x, raised to p/p'.
    let rows: Vec<Vec<T>> = (0..count)
        .into_par_iter()
        .map(|x| {
            let mut prefix = Vec::with_capacity(count + 1);
            prefix.push(T::zero());
            let mut acc = T::zero();
            for t in 0..count {
                acc += kernel(x, t);
                prefix.push(acc);
            }
            (0..=top)
                .map(|level| {
                    let per = 1usize << (d * (depth - level));
                    let start = (x / per) * per;
                    let inner = (prefix[start + per] - prefix[start]) / T::from_usize_lossy(per);
                    inner.powf(outer)
                })
                .collect()
        })
        .collect();

    let mut best = (T::zero(), win.root_id());
    for level in 0..=top {
        let per = win.leaves_per_cube(level);
        for id in win.cubes_at(level) {
            let range = win.leaf_range(id);
            let mut acc = T::zero();
            for row in &rows[range] {
                acc += row[level as usize];
            }
            let v = acc / T::from_usize_lossy(per);
            if v > best.0 {
                best = (v, id);
            }
        }
    }
    Ok(ApReport {
        p,
        value: best.0,
        witness: win.cube(best.1),
        grid: win.grid(),
    })
}

/// [`ap_characteristic_in_window`] over several shifted grids: the field is
/// resampled onto the largest window of each grid inside its own root, at the
/// same leaf resolution, and the largest value is reported.
pub fn ap_characteristic<T: Real>(
    w: &Field<T>,
    p: T,
    grids: &[Grid],
    max_level: Option<u32>,
) -> Result<ApReport<T>> {
    let mut best: Option<ApReport<T>> = None;
    let own = [w.window().grid()];
    let grids = if grids.is_empty() { &own[..] } else { grids };
    for &g in grids {
        let shifted = w.on_grid(g)?;
        let r = ap_characteristic_in_window(&shifted, p, max_level)?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one grid"))
}

/// `sup_I ‖(m_I W)^{1/2} (m_I W^{-1})^{1/2}‖²`, the averaged form of the
/// `A_2` characteristic.
pub fn a2_averaged<T: Real>(w: &Field<T>) -> Result<(T, CubeId)> {
    w.check_weight()?;
    let avg = w.averages();
    let inv = w.inverse()?.averages();
    let mut best = (T::zero(), w.window().root_id());
    for id in w.window().cubes() {
        let a = linalg::spd_sqrt(avg.get(id))?;
        let b = linalg::spd_sqrt(inv.get(id))?;
        let v = linalg::op_norm(&(a * b)).powi(2);
        if v > best.0 {
            best = (v, id);
        }
    }
    Ok(best)
}
