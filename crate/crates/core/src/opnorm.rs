//! Dense matrices of dyadic operators on a window and their weighted norms.
//!
//! A vector field with `n` components on `N` leaves is flattened to a vector
//! of length `n N`, leaf-major: entry `x n + i` is component `i` on leaf `x`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{Signature, Window};
use crate::error::{Error, Result};
use crate::fields::{check_exponent, Field, ReducingTable};
use crate::linalg;
use crate::scalar::Real;
use crate::transforms::{
    conjugated_paraproduct, dual_paraproduct, haar_multiplier, haar_shift, paraproduct,
    shift_commutator, HaarSpectrum, ShiftMap,
};

/// Largest `n N` for which operators are materialized.
pub const DENSE_CAP: usize = 4096;

/// The dyadic operators that can be materialized.
#[derive(Clone, Copy, Debug)]
pub enum Operator<'a, T: Real> {
    /// `π_B`.
    Paraproduct(&'a Field<T>),
    /// `(π_{B*})*`.
    DualParaproduct(&'a Field<T>),
    /// `T_A`.
    HaarMultiplier(&'a HaarSpectrum<T>),
    /// `Q_σ E_{L-1}`: the shift after discarding finest-level content.
    HaarShift(&'a ShiftMap),
    /// `[B, Q_σ] E_{L-1}`; `B` itself must have headroom.
    Commutator(&'a Field<T>, &'a ShiftMap),
    /// `Π_A^{W,U,p} f = Σ V_I(W) A_I^ε m_I(U^{-1/p} f) h_I^ε`.
    ConjugatedParaproduct {
        a: &'a HaarSpectrum<T>,
        vw: &'a ReducingTable<T>,
        u: &'a Field<T>,
    },
}

impl<'a, T: Real> Operator<'a, T> {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::Paraproduct(_) => "paraproduct",
            Operator::DualParaproduct(_) => "dual_paraproduct",
            Operator::HaarMultiplier(_) => "haar_multiplier",
            Operator::HaarShift(_) => "haar_shift",
            Operator::Commutator(..) => "commutator",
            Operator::ConjugatedParaproduct { .. } => "conjugated_paraproduct",
        }
    }

    pub fn window(&self) -> &Window {
        match self {
            Operator::Paraproduct(b)
            | Operator::DualParaproduct(b)
            | Operator::Commutator(b, _) => b.window(),
            Operator::HaarMultiplier(a) => a.window(),
            Operator::HaarShift(s) => s.window(),
            Operator::ConjugatedParaproduct { a, .. } => a.window(),
        }
    }

    /// Applies the operator through the transform module.
    pub fn apply(&self, f: &Field<T>) -> Result<Field<T>> {
        let top = |f: &Field<T>| f.coarsen(f.window().depth().saturating_sub(1));
        match *self {
            Operator::Paraproduct(b) => paraproduct(b, f),
            Operator::DualParaproduct(b) => dual_paraproduct(b, f),
            Operator::HaarMultiplier(a) => haar_multiplier(a, f),
            Operator::HaarShift(s) => haar_shift(s, &top(f)),
            Operator::Commutator(b, s) => shift_commutator(b, s, &top(f)),
            Operator::ConjugatedParaproduct { a, vw, u } => conjugated_paraproduct(a, vw, u, f),
        }
    }
}

/// A dense operator on flattened vector fields.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<T: Real> {
    pub name: String,
    pub window: Window,
    /// Components per leaf of inputs and outputs.
    pub n: usize,
    pub matrix: DMatrix<T>,
}

pub fn flatten<T: Real>(f: &Field<T>) -> DVector<T> {
    let n = f.rows();
    DVector::from_fn(f.leaves().len() * n, |k, _| f.leaf(k / n)[(k % n, 0)])
}

pub fn unflatten<T: Real>(window: &Window, n: usize, v: &DVector<T>) -> Result<Field<T>> {
    Field::from_fn(window.clone(), |x| {
        DMatrix::from_fn(n, 1, |i, _| v[x * n + i])
    })
}

/// Column-by-column construction from indicator-times-basis fields.
pub fn materialize<T: Real>(op: &Operator<'_, T>, n: usize) -> Result<OperatorMatrix<T>> {
    let win = op.window().clone();
    let dim = n * win.leaf_count();
    if dim > DENSE_CAP {
        return Err(Error::TooLarge(dim, DENSE_CAP));
    }
    let columns = (0..dim)
        .into_par_iter()
        .map(|k| {
            let basis = Field::from_fn(win.clone(), |x| {
                DMatrix::from_fn(
                    n,
                    1,
                    |i, _| if x * n + i == k { T::one() } else { T::zero() },
                )
            })?;
            let out = op.apply(&basis)?;
            if out.rows() != n || out.cols() != 1 {
                return Err(Error::Mismatch(
                    "operator changes the number of components".into(),
                ));
            }
            Ok(flatten(&out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorMatrix {
        name: op.name().to_string(),
        window: win,
        n,
        matrix: DMatrix::from_columns(&columns),
    })
}

impl<T: Real> OperatorMatrix<T> {
    pub fn apply(&self, f: &Field<T>) -> Result<Field<T>> {
        if f.window() != &self.window || f.rows() != self.n || f.cols() != 1 {
            return Err(Error::Mismatch("field does not match the operator".into()));
        }
        unflatten(&self.window, self.n, &(&self.matrix * flatten(f)))
    }

    /// The adjoint for the unweighted pairing, which is the transpose.
    pub fn adjoint(&self) -> OperatorMatrix<T> {
        OperatorMatrix {
            name: format!("{}_adjoint", self.name),
            window: self.window.clone(),
            n: self.n,
            matrix: self.matrix.transpose(),
        }
    }

    /// Largest entrywise gap to the transform-module application on `f`.
    pub fn consistency(&self, op: &Operator<'_, T>, f: &Field<T>) -> Result<T> {
        let a = self.apply(f)?;
        let b = op.apply(f)?;
        Ok(a.sub(&b)?
            .leaves()
            .iter()
            .fold(T::zero(), |m, x| m.max(x.amax())))
    }

    /// Binary dump: one JSON header line, then the matrix as little-endian
    /// `f64` values in row-major order.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "name": self.name,
            "rows": self.matrix.nrows(),
            "cols": self.matrix.ncols(),
            "n": self.n,
            "d": self.window.dim(),
            "depth": self.window.depth(),
            "root": self.window.root().address(),
        });
        writeln!(out, "{header}")?;
        for r in 0..self.matrix.nrows() {
            for c in 0..self.matrix.ncols() {
                out.write_all(&self.matrix[(r, c)].to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

fn block_scaled<T: Real>(
    t: &DMatrix<T>,
    n: usize,
    left: &[DMatrix<T>],
    right: &[DMatrix<T>],
) -> DMatrix<T> {
    let mut m = t.clone();
    for (x, r) in right.iter().enumerate() {
        let cols = m.columns(x * n, n) * r;
        m.columns_mut(x * n, n).copy_from(&cols);
    }
    for (x, l) in left.iter().enumerate() {
        let rows = l * m.rows(x * n, n);
        m.rows_mut(x * n, n).copy_from(&rows);
    }
    m
}

/// `‖T‖_{L²(U) → L²(W)}`: the largest singular value of
/// `D_W^{1/2} T D_U^{-1/2}` with `D_V = ⊕_x |x| V(x)`.
pub fn weighted_opnorm_p2<T: Real>(t: &OperatorMatrix<T>, w: &Field<T>, u: &Field<T>) -> Result<T> {
    w.same_window(u)?;
    if w.window() != &t.window || w.rows() != t.n {
        return Err(Error::Mismatch("weights do not match the operator".into()));
    }
    let vol = t.window.leaf_volume::<T>().sqrt();
    let left = w
        .leaves()
        .par_iter()
        .map(|m| linalg::spd_sqrt(m).map(|s| s * vol))
        .collect::<Result<Vec<_>>>()?;
    let right = u
        .leaves()
        .par_iter()
        .map(|m| linalg::spd_power(m, T::lit(-0.5)).map(|s| s / vol))
        .collect::<Result<Vec<_>>>()?;
    let m = block_scaled(&t.matrix, t.n, &left, &right);
    Ok(m.singular_values().max())
}

/// Lower bound for `‖T‖_{L^p(U) → L^p(W)}`; no upper bound is claimed.
#[derive(Clone, Debug, Serialize)]
pub struct LpEstimate {
    pub p: f64,
    pub lower: f64,
    /// Always `None`: there is no certified upper bound for `p ≠ 2`.
    pub upper: Option<f64>,
    pub lower_bound_only: bool,
    /// Best ratio among indicator test functions alone.
    pub test_lower: f64,
    /// Ascent steps accepted.
    pub ascent_steps: usize,
}

struct LpNorms<T: Real> {
    n: usize,
    vol: T,
    p: T,
    w: Vec<DMatrix<T>>,
    u: Vec<DMatrix<T>>,
}

impl<T: Real> LpNorms<T> {
    /// `Σ_x |x| |A(x) v_x|^p` and its gradient in `v`.
    fn value(&self, a: &[DMatrix<T>], v: &DVector<T>) -> T {
        let mut acc = T::zero();
        for (x, m) in a.iter().enumerate() {
            acc += (m * v.rows(x * self.n, self.n)).norm().powf(self.p);
        }
        acc * self.vol
    }

    fn gradient(&self, a: &[DMatrix<T>], v: &DVector<T>) -> DVector<T> {
        let mut g = DVector::zeros(v.len());
        for (x, m) in a.iter().enumerate() {
            let y = m * v.rows(x * self.n, self.n);
            let r = y.norm();
            if r > T::zero() {
                let s = r.powf(self.p - T::lit(2.0)) * self.p * self.vol;
                g.rows_mut(x * self.n, self.n)
                    .copy_from(&(m.transpose() * y * s));
            }
        }
        g
    }

    fn log_ratio(&self, t: &DMatrix<T>, f: &DVector<T>) -> Option<T> {
        let den = self.value(&self.u, f);
        if den <= T::zero() {
            return None;
        }
        let num = self.value(&self.w, &(t * f));
        (num > T::zero()).then(|| (num.ln() - den.ln()) / self.p)
    }
}

/// Indicator test functions `χ_J e_i` and `U^{-1/p} χ_J e_i` over every cube
/// `J`, followed by up to `budget` steps of steepest ascent on the `L^p` ratio.
pub fn lp_opnorm_estimate<T: Real>(
    t: &OperatorMatrix<T>,
    w: &Field<T>,
    u: &Field<T>,
    p: T,
    budget: usize,
) -> Result<LpEstimate> {
    check_exponent(p)?;
    w.same_window(u)?;
    if w.window() != &t.window || w.rows() != t.n {
        return Err(Error::Mismatch("weights do not match the operator".into()));
    }
    let n = t.n;
    let win = t.window.clone();
    let norms = LpNorms {
        n,
        vol: win.leaf_volume::<T>(),
        p,
        w: w.leaves()
            .par_iter()
            .map(|m| linalg::spd_power(m, p.recip()))
            .collect::<Result<_>>()?,
        u: u.leaves()
            .par_iter()
            .map(|m| linalg::spd_power(m, p.recip()))
            .collect::<Result<_>>()?,
    };
    let pf = p.to_f64_lossy();
    if t.matrix.amax() == T::zero() {
        return Ok(LpEstimate {
            p: pf,
            lower: 0.0,
            upper: None,
            lower_bound_only: true,
            test_lower: 0.0,
            ascent_steps: 0,
        });
    }
    let u_inv: Vec<DMatrix<T>> = norms
        .u
        .par_iter()
        .map(linalg::spd_inverse)
        .collect::<Result<_>>()?;
    let ident = vec![DMatrix::<T>::identity(n, n); win.leaf_count()];
    let leaves = win.leaf_count();

    // Prefix sums of columns give T χ_J e_i for every cube in O(n N) each.
    let mut best: Option<(T, DVector<T>)> = None;
    for scaling in [&ident, &u_inv] {
        let id_left = vec![DMatrix::<T>::identity(n, n); leaves];
        let tm = block_scaled(&t.matrix, n, &id_left, scaling);
        for i in 0..n {
            let mut prefix = vec![DVector::<T>::zeros(n * leaves); leaves + 1];
            for x in 0..leaves {
                prefix[x + 1] = &prefix[x] + tm.column(x * n + i);
            }
            let found = win
                .cubes()
                .collect::<Vec<_>>()
                .into_par_iter()
                .filter_map(|j| {
                    let r = win.leaf_range(j);
                    let image = &prefix[r.end] - &prefix[r.start];
                    let mut f = DVector::zeros(n * leaves);
                    for x in r {
                        f.rows_mut(x * n, n).copy_from(&scaling[x].column(i));
                    }
                    let den = norms.value(&norms.u, &f);
                    let num = norms.value(&norms.w, &image);
                    (den > T::zero() && num > T::zero()).then(|| ((num.ln() - den.ln()) / p, f))
                })
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
            if let Some(c) = found {
                if best.as_ref().is_none_or(|b| c.0 > b.0) {
                    best = Some(c);
                }
            }
        }
    }
    let Some((mut value, mut f)) = best else {
        return Ok(LpEstimate {
            p: pf,
            lower: 0.0,
            upper: None,
            lower_bound_only: true,
            test_lower: 0.0,
            ascent_steps: 0,
        });
    };
    let test_lower = value.exp().to_f64_lossy();

    let tt = t.matrix.transpose();
    let mut step = T::one();
    let mut accepted = 0;
    for _ in 0..budget {
        let g = &t.matrix * &f;
        let num = norms.value(&norms.w, &g);
        let den = norms.value(&norms.u, &f);
        let grad = &tt * norms.gradient(&norms.w, &g) / num - norms.gradient(&norms.u, &f) / den;
        let gn = grad.norm();
        if gn <= T::lit(1e-300) {
            break;
        }
        let dir = grad / gn * f.norm();
        let mut improved = false;
        while step > T::lit(1e-12) {
            let cand = &f + &dir * step;
            if let Some(v) = norms.log_ratio(&t.matrix, &cand) {
                if v > value {
                    let scale = norms.value(&norms.u, &cand).powf(-p.recip());
                    f = cand * scale;
                    value = v;
                    improved = true;
                    step = (step * T::lit(2.0)).min(T::one());
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        if !improved {
            break;
        }
        accepted += 1;
    }
    Ok(LpEstimate {
        p: pf,
        lower: value.exp().to_f64_lossy(),
        upper: None,
        lower_bound_only: true,
        test_lower,
        ascent_steps: accepted,
    })
}

/// Both sides of the Haar multiplier characterization.
#[derive(Clone, Debug, Serialize)]
pub struct MultiplierRelation {
    pub p: f64,
    /// `sup_{I,ε} ‖V_I(W) A_I^ε V_I(U)^{-1}‖`.
    pub sup_criterion: f64,
    /// Exact at `p = 2`, a lower bound otherwise.
    pub norm: f64,
    pub exact: bool,
    /// `norm / sup_criterion`, 0 when both vanish.
    pub ratio: f64,
}

pub fn haar_multiplier_norm_relation<T: Real>(
    a: &HaarSpectrum<T>,
    w: &Field<T>,
    u: &Field<T>,
    p: T,
    budget: usize,
) -> Result<MultiplierRelation> {
    let vw = ReducingTable::primal(w, p)?;
    let vu = ReducingTable::primal(u, p)?;
    let win = w.window();
    let dim = win.dim();
    let mut sup = T::zero();
    for id in win.interior_cubes() {
        for e in Signature::cancellative(dim) {
            sup = sup.max(linalg::op_norm(
                &(vw.get(id) * a.get(id, e) * vu.inverse(id)),
            ));
        }
    }
    let t = materialize(&Operator::HaarMultiplier(a), w.rows())?;
    let exact = p == T::lit(2.0);
    let norm = if exact {
        weighted_opnorm_p2(&t, w, u)?.to_f64_lossy()
    } else {
        lp_opnorm_estimate(&t, w, u, p, budget)?.lower
    };
    let sup = sup.to_f64_lossy();
    Ok(MultiplierRelation {
        p: p.to_f64_lossy(),
        sup_criterion: sup,
        norm,
        exact,
        ratio: if sup == 0.0 { 0.0 } else { norm / sup },
    })
}
