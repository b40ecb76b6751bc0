//! BMO, Carleson and H¹ quantities for a pair of matrix weights.
//!
//! Every supremum here is a window supremum: it ranges over the cubes of the
//! window the fields live on and says nothing about finer scales.

mod duality;
mod ensemble;
mod pipeline;
mod summation;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{CubeId, Grid, Signature, Window};
use crate::error::{Error, Result};
use crate::fields::{conjugate, Field, ReducingTable};
use crate::linalg;
use crate::scalar::Real;
use crate::transforms::{mu_multiplier_spectrum, weighted_square_function_of, HaarSpectrum};

pub use duality::{
    duality_experiment, duality_record, extremal_check, extremal_element, DualityExperiment,
    DualityRecord, ExtremalCheck,
};
pub use ensemble::{
    equivalence_record, equivalence_records, random_instance, random_symbol, ratio_bands, Band,
    EnsembleSpec, EquivalenceRecord, Instance,
};
pub use pipeline::{
    bmo_over_shifted_grids, matrix_weight_theorem_pipeline, GridValues, PipelineReport,
    ShiftedGridReport,
};
pub use summation::{buckley_fkp_summation, SummationReport};

/// A window supremum of per-cube contributions together with the cube that
/// attains it.
#[derive(Clone, Debug, Serialize)]
pub struct BmoReport {
    pub quantity: String,
    pub p: f64,
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub grid: Grid,
    /// Indexed by the window's linear cube id.
    pub contributions: Vec<f64>,
    pub supremum: f64,
    pub witness: CubeId,
    pub witness_address: String,
}

impl BmoReport {
    pub fn new(quantity: &str, p: f64, window: &Window, contributions: Vec<f64>) -> Self {
        let (mut best, mut sup) = (0, f64::NEG_INFINITY);
        for (i, &c) in contributions.iter().enumerate() {
            if c > sup {
                best = i;
                sup = c;
            }
        }
        let witness = window.from_linear(best);
        BmoReport {
            quantity: quantity.to_string(),
            p,
            epsilon: None,
            lambda: None,
            grid: window.grid(),
            supremum: sup.max(0.0),
            witness,
            witness_address: window.address(witness),
            contributions,
        }
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    /// Contribution of one cube.
    pub fn at(&self, window: &Window, id: CubeId) -> f64 {
        self.contributions[window.linear(id)]
    }
}

/// The two weights of a two-weight problem at a fixed exponent, with all
/// four reducing tables built once.
#[derive(Clone, Debug)]
pub struct WeightPair<T: Real> {
    w: Field<T>,
    u: Field<T>,
    p: T,
    vw: ReducingTable<T>,
    vu: ReducingTable<T>,
    dw: ReducingTable<T>,
    du: ReducingTable<T>,
}

impl<T: Real> WeightPair<T> {
    pub fn new(w: &Field<T>, u: &Field<T>, p: T) -> Result<Self> {
        w.same_window(u)?;
        if w.rows() != u.rows() {
            return Err(Error::Mismatch("weights have different sizes".into()));
        }
        Ok(WeightPair {
            vw: ReducingTable::primal(w, p)?,
            vu: ReducingTable::primal(u, p)?,
            dw: ReducingTable::dual(w, p)?,
            du: ReducingTable::dual(u, p)?,
            w: w.clone(),
            u: u.clone(),
            p,
        })
    }

    pub fn w(&self) -> &Field<T> {
        &self.w
    }

    pub fn u(&self) -> &Field<T> {
        &self.u
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn window(&self) -> &Window {
        self.w.window()
    }

    /// `V_I(W, p)`.
    pub fn vw(&self) -> &ReducingTable<T> {
        &self.vw
    }

    /// `V_I(U, p)`.
    pub fn vu(&self) -> &ReducingTable<T> {
        &self.vu
    }

    /// `V'_I(W, p)`, which is also `V_I(W^{1-p'}, p')`.
    pub fn dual_w(&self) -> &ReducingTable<T> {
        &self.dw
    }

    /// `V'_I(U, p)`, which is also `V_I(U^{1-p'}, p')`.
    pub fn dual_u(&self) -> &ReducingTable<T> {
        &self.du
    }
}

fn per_cube<T: Real>(
    win: &Window,
    f: impl Fn(CubeId) -> Result<T> + Sync + Send,
) -> Result<Vec<f64>> {
    (0..win.cube_count())
        .into_par_iter()
        .map(|lin| f(win.from_linear(lin)).map(|v| v.to_f64_lossy()))
        .collect()
}

fn leaf_mean<T: Real>(win: &Window, id: CubeId, mut g: impl FnMut(usize) -> T) -> T {
    let range = win.leaf_range(id);
    let n = T::from_usize_lossy(range.len());
    let mut acc = T::zero();
    for x in range {
        acc += g(x);
    }
    acc / n
}

/// Interior cubes inside `k`, `k` included, coarse to fine.
fn interior_descendants(win: &Window, k: CubeId) -> impl Iterator<Item = CubeId> {
    let d = win.dim() as u32;
    (k.level..win.depth()).flat_map(move |level| {
        let s = d * (level - k.level);
        ((k.index << s)..((k.index + 1) << s)).map(move |index| CubeId { level, index })
    })
}

/// Sums of a per-cube quantity over each cube's subtree, indexed linearly.
fn subtree_sums<V: Clone>(win: &Window, mut own: Vec<V>, add: impl Fn(&mut V, &V)) -> Vec<V> {
    for level in (1..=win.depth()).rev() {
        for id in win.cubes_at(level) {
            let parent = win.linear(win.parent(id).expect("level > 0"));
            let here = own[win.linear(id)].clone();
            add(&mut own[parent], &here);
        }
    }
    own
}

fn check_symbol<T: Real>(b: &Field<T>, n: usize, win: &Window) -> Result<()> {
    if b.window() != win || b.rows() != n || b.cols() != n {
        return Err(Error::Mismatch(
            "symbol must be an n x n field on the weights' window".into(),
        ));
    }
    Ok(())
}

fn check_spectrum<T: Real>(a: &HaarSpectrum<T>, n: usize, win: &Window) -> Result<()> {
    if a.window() != win || a.rows() != n || a.cols() != n {
        return Err(Error::Mismatch(
            "coefficients must be n x n on the weights' window".into(),
        ));
    }
    Ok(())
}

/// The original definition:
/// `sup_I ⨍_I ‖(m_I W^{1/p})(B(x) - m_I B)(m_I U^{1/p})^{-1}‖^{1+ε} dx`.
pub fn bmo_original<T: Real>(
    b: &Field<T>,
    w: &Field<T>,
    u: &Field<T>,
    p: T,
    eps: T,
) -> Result<BmoReport> {
    crate::fields::check_exponent(p)?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    w.same_window(u)?;
    let win = w.window().clone();
    check_symbol(b, w.rows(), &win)?;
    let wa = w.pointwise_power(p.recip())?.averages();
    let ua = u.pointwise_power(p.recip())?.averages();
    let ba = b.averages();
    let lin_count = win.cube_count();
    let right: Vec<DMatrix<T>> = (0..lin_count)
        .into_par_iter()
        .map(|lin| linalg::spd_inverse(&ua.as_slice()[lin]))
        .collect::<Result<_>>()?;
    let expo = T::one() + eps;
    let c = per_cube(&win, |id| {
        let lin = win.linear(id);
        let (l, r, m) = (&wa.as_slice()[lin], &right[lin], ba.get(id));
        Ok(leaf_mean(&win, id, |x| {
            linalg::op_norm(&(l * (b.leaf(x) - m) * r)).powf(expo)
        }))
    })?;
    Ok(BmoReport::new("bmo_original", p.to_f64_lossy(), &win, c).with_epsilon(eps.to_f64_lossy()))
}

/// The same oscillation with reducing operators in place of averages:
/// `sup_I ⨍_I ‖V_I(W)(B(x) - m_I B)V_I(U)^{-1}‖^{1+ε} dx`.
pub fn bmo_reduced<T: Real>(b: &Field<T>, pair: &WeightPair<T>, eps: T) -> Result<BmoReport> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let win = pair.window().clone();
    check_symbol(b, pair.w.rows(), &win)?;
    let ba = b.averages();
    let expo = T::one() + eps;
    let c = per_cube(&win, |id| {
        let (l, r, m) = (pair.vw.get(id), pair.vu.inverse(id), ba.get(id));
        Ok(leaf_mean(&win, id, |x| {
            linalg::op_norm(&(l * (b.leaf(x) - m) * r)).powf(expo)
        }))
    })?;
    Ok(
        BmoReport::new("bmo_reduced", pair.p.to_f64_lossy(), &win, c)
            .with_epsilon(eps.to_f64_lossy()),
    )
}

/// The Carleson quantity in its two forms.
#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    /// `|K|^{-1} Σ_{I ⊆ K} Σ_ε ‖V_I(W) A_I^ε V_K(U)^{-1}‖²` per `K`.
    pub sum: BmoReport,
    /// Smallest `C` with `Σ (A_I^ε)^* V_I(W)² A_I^ε ≼ C |K| V_K(U)²` per `K`.
    pub psd: BmoReport,
    /// `psd ≤ sum ≤ n psd` held on every cube.
    pub consistent: bool,
}

/// Carleson quantity for arbitrary tables: `outer` supplies `V_I` on the
/// inner cubes and `inner` supplies `V_K` on the testing cube.
pub fn carleson_from_tables<T: Real>(
    outer: &ReducingTable<T>,
    inner: &ReducingTable<T>,
    a: &HaarSpectrum<T>,
) -> Result<CarlesonReport> {
    let win = outer.window().clone();
    if inner.window() != &win {
        return Err(Error::Mismatch(
            "reducing tables live on different windows".into(),
        ));
    }
    let n = outer.get(win.root_id()).nrows();
    check_spectrum(a, n, &win)?;
    let dim = win.dim();
    // P_I^ε = V_I A_I^ε, and the PSD block Σ_ε P^T P per cube.
    let products: Vec<Vec<DMatrix<T>>> = win
        .interior_cubes()
        .map(|id| {
            Signature::cancellative(dim)
                .map(|e| outer.get(id) * a.get(id, e))
                .collect()
        })
        .collect();
    let mut own = vec![DMatrix::<T>::zeros(n, n); win.cube_count()];
    for (lin, ps) in products.iter().enumerate() {
        for pm in ps {
            own[lin] += pm.transpose() * pm;
        }
    }
    let blocks = subtree_sums(&win, own, |a, b| *a += b);
    let sum = per_cube(&win, |k| {
        let vinv = inner.inverse(k);
        let mut acc = T::zero();
        for i in interior_descendants(&win, k) {
            for pm in &products[win.linear(i)] {
                acc += linalg::op_norm(&(pm * vinv)).powi(2);
            }
        }
        Ok(acc / win.volume::<T>(k.level))
    })?;
    let psd = per_cube(&win, |k| {
        let vinv = inner.inverse(k);
        let m = linalg::symmetrize(&(vinv * &blocks[win.linear(k)] * vinv));
        Ok(linalg::max_eigenvalue(&m).max(T::zero()) / win.volume::<T>(k.level))
    })?;
    let nf = n as f64;
    let consistent = sum.iter().zip(&psd).all(|(&s, &c)| {
        let slack = 1e-9 * s.abs().max(c.abs()).max(1e-300);
        c <= s + slack && s <= nf * c + slack
    });
    let p = outer.p().to_f64_lossy();
    Ok(CarlesonReport {
        sum: BmoReport::new("carleson", p, &win, sum),
        psd: BmoReport::new("carleson_psd", p, &win, psd),
        consistent,
    })
}

/// `B(W, U, A, p)` together with its matrix-ordering form.
pub fn carleson_norm<T: Real>(pair: &WeightPair<T>, a: &HaarSpectrum<T>) -> Result<CarlesonReport> {
    carleson_from_tables(&pair.vw, &pair.vu, a)
}

/// The testing condition that is finite exactly when the paraproduct is
/// bounded: `B(W, U, A, p)` for `p ≥ 2` and `B(U^{1-p'}, W^{1-p'}, A^*, p')`
/// for `p < 2`.
pub fn condition_c<T: Real>(pair: &WeightPair<T>, a: &HaarSpectrum<T>) -> Result<CarlesonReport> {
    let mut r = if pair.p >= T::lit(2.0) {
        carleson_from_tables(&pair.vw, &pair.vu, a)?
    } else {
        let at = a.map_coeffs(|_, _, m| m.transpose());
        carleson_from_tables(&pair.du, &pair.dw, &at)?
    };
    let p = pair.p.to_f64_lossy();
    r.sum.p = p;
    r.psd.p = p;
    r.sum.quantity = "condition_c".into();
    r.psd.quantity = "condition_c_psd".into();
    Ok(r)
}

/// `sup_J |J|^{-1} Σ_{I ⊆ J} Σ_ε ‖V_I(W) A_I^ε V_I(U)^{-1}‖²`.
pub fn condition_b<T: Real>(pair: &WeightPair<T>, a: &HaarSpectrum<T>) -> Result<BmoReport> {
    let win = pair.window().clone();
    check_spectrum(a, pair.w.rows(), &win)?;
    let dim = win.dim();
    let mut own = vec![T::zero(); win.cube_count()];
    for id in win.interior_cubes() {
        let (l, r) = (pair.vw.get(id), pair.vu.inverse(id));
        for e in Signature::cancellative(dim) {
            own[win.linear(id)] += linalg::op_norm(&(l * a.get(id, e) * r)).powi(2);
        }
    }
    let sums = subtree_sums(&win, own, |a, b| *a += *b);
    let c = per_cube(&win, |j| Ok(sums[win.linear(j)] / win.volume::<T>(j.level)))?;
    Ok(BmoReport::new(
        "condition_b",
        pair.p.to_f64_lossy(),
        &win,
        c,
    ))
}

/// Smallest `C_J` with
/// `Σ_{I ⊆ J} Σ_ε m_I(U^{-1}) (B_I^ε)^* (m_I W) B_I^ε m_I(U^{-1}) ≼ C_J U^{-1}(J)`.
pub fn hlw_condition<T: Real>(b: &Field<T>, w: &Field<T>, u: &Field<T>) -> Result<BmoReport> {
    w.same_window(u)?;
    let win = w.window().clone();
    let n = w.rows();
    check_symbol(b, n, &win)?;
    let bs = HaarSpectrum::analyze(b);
    let wa = w.averages();
    let ui = u.inverse()?;
    let uia = ui.averages();
    let dim = win.dim();
    let mut own = vec![DMatrix::<T>::zeros(n, n); win.cube_count()];
    for id in win.interior_cubes() {
        let mu = uia.get(id);
        for e in Signature::cancellative(dim) {
            let x = bs.get(id, e) * mu;
            own[win.linear(id)] += x.transpose() * wa.get(id) * x;
        }
    }
    let blocks = subtree_sums(&win, own, |a, b| *a += b);
    let c = per_cube(&win, |j| {
        let g = linalg::symmetrize(&blocks[win.linear(j)]);
        let rhs = uia.get(j) * win.volume::<T>(j.level);
        Ok(linalg::max_generalized_eigenvalue(&g, &rhs)?.max(T::zero()))
    })?;
    Ok(BmoReport::new("hlw", 2.0, &win, c))
}

/// `sup_J ⨍_J ‖W^{1/p}(x)(B(x) - m_J B) V_J(U)^{-1}‖^p dx`.
pub fn bloom_bprime<T: Real>(b: &Field<T>, pair: &WeightPair<T>) -> Result<BmoReport> {
    let win = pair.window().clone();
    check_symbol(b, pair.w.rows(), &win)?;
    let wp = pair.w.pointwise_power(pair.p.recip())?;
    let ba = b.averages();
    let p = pair.p;
    let c = per_cube(&win, |j| {
        let (m, r) = (ba.get(j), pair.vu.inverse(j));
        Ok(leaf_mean(&win, j, |x| {
            linalg::op_norm(&(wp.leaf(x) * (b.leaf(x) - m) * r)).powf(p)
        }))
    })?;
    Ok(BmoReport::new("bloom_bprime", p.to_f64_lossy(), &win, c))
}

/// `sup_J ⨍_J ‖U^{-1/p}(x)(B^*(x) - m_J B^*) V'_J(W)^{-1}‖^{p'} dx`.
pub fn bloom_cprime<T: Real>(b: &Field<T>, pair: &WeightPair<T>) -> Result<BmoReport> {
    let win = pair.window().clone();
    check_symbol(b, pair.w.rows(), &win)?;
    let um = pair.u.pointwise_power(-pair.p.recip())?;
    let bt = b.transpose();
    let ba = bt.averages();
    let q = conjugate(pair.p);
    let c = per_cube(&win, |j| {
        let (m, r) = (ba.get(j), pair.dw.inverse(j));
        Ok(leaf_mean(&win, j, |x| {
            linalg::op_norm(&(um.leaf(x) * (bt.leaf(x) - m) * r)).powf(q)
        }))
    })?;
    Ok(BmoReport::new(
        "bloom_cprime",
        pair.p.to_f64_lossy(),
        &win,
        c,
    ))
}

/// The two sides of the `p = 2` John–Nirenberg equivalence.
#[derive(Clone, Debug, Serialize)]
pub struct JnPair {
    /// `⨍_I ‖(m_I W)^{-1/2}(B - m_I B)(m_I W)^{-1/2}‖^{1+ε}`.
    pub left: BmoReport,
    /// `⨍_I ‖W^{-1/2}(x)(B^* - m_I B^*)(m_I W)^{-1/2}‖²`.
    pub right: BmoReport,
}

impl JnPair {
    /// Both sides vanish or both are positive.
    pub fn agree(&self, tol: f64) -> bool {
        (self.left.supremum <= tol) == (self.right.supremum <= tol)
    }
}

pub fn jn_p2_pair<T: Real>(b: &Field<T>, w: &Field<T>, eps: T) -> Result<JnPair> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    w.check_weight()?;
    let win = w.window().clone();
    check_symbol(b, w.rows(), &win)?;
    let wa = w.averages();
    let isqrt: Vec<DMatrix<T>> = wa
        .as_slice()
        .par_iter()
        .map(|m| linalg::spd_power(m, T::lit(-0.5)))
        .collect::<Result<_>>()?;
    let wm = w.pointwise_power(T::lit(-0.5))?;
    let ba = b.averages();
    let bt = b.transpose();
    let bta = bt.averages();
    let expo = T::one() + eps;
    let left = per_cube(&win, |i| {
        let (s, m) = (&isqrt[win.linear(i)], ba.get(i));
        Ok(leaf_mean(&win, i, |x| {
            linalg::op_norm(&(s * (b.leaf(x) - m) * s)).powf(expo)
        }))
    })?;
    let right = per_cube(&win, |i| {
        let (s, m) = (&isqrt[win.linear(i)], bta.get(i));
        Ok(leaf_mean(&win, i, |x| {
            linalg::op_norm(&(wm.leaf(x) * (bt.leaf(x) - m) * s)).powi(2)
        }))
    })?;
    Ok(JnPair {
        left: BmoReport::new("jn_left", 2.0, &win, left).with_epsilon(eps.to_f64_lossy()),
        right: BmoReport::new("jn_right", 2.0, &win, right),
    })
}

/// Weighted and plain mean oscillations of a vector field.
#[derive(Clone, Debug, Serialize)]
pub struct VectorJn {
    /// `⨍_I |W^{1/p}(x) V_I(W)^{-1}(f - m_I f)|^p`.
    pub weighted: BmoReport,
    /// `⨍_I |f - m_I f|^p`.
    pub plain: BmoReport,
}

pub fn vector_jn<T: Real>(f: &Field<T>, w: &Field<T>, p: T) -> Result<VectorJn> {
    w.same_window(f)?;
    if f.cols() != 1 || f.rows() != w.rows() {
        return Err(Error::Mismatch(
            "expected a vector field matching the weight".into(),
        ));
    }
    let table = ReducingTable::primal(w, p)?;
    let wp = w.pointwise_power(p.recip())?;
    let win = w.window().clone();
    let fa = f.averages();
    let weighted = per_cube(&win, |i| {
        let (r, m) = (table.inverse(i), fa.get(i));
        Ok(leaf_mean(&win, i, |x| {
            (wp.leaf(x) * r * (f.leaf(x) - m)).norm().powf(p)
        }))
    })?;
    let plain = per_cube(&win, |i| {
        let m = fa.get(i);
        Ok(leaf_mean(&win, i, |x| (f.leaf(x) - m).norm().powf(p)))
    })?;
    let pf = p.to_f64_lossy();
    Ok(VectorJn {
        weighted: BmoReport::new("vector_jn", pf, &win, weighted),
        plain: BmoReport::new("vector_bmo", pf, &win, plain),
    })
}

/// `‖S_{W^{-1}} M_U Φ‖_{L¹}`.
pub fn h1_norm<T: Real>(phi: &Field<T>, w: &Field<T>, u: &Field<T>) -> Result<T> {
    w.same_window(u)?;
    let coeffs = mu_multiplier_spectrum(u, phi)?;
    let s = weighted_square_function_of(&w.inverse()?, &coeffs)?;
    let mut acc = T::zero();
    for m in s.leaves() {
        acc += m[(0, 0)];
    }
    Ok(acc * w.window().leaf_volume::<T>())
}

/// `⟨Φ, B⟩ = ∫ tr(Φ(x) B(x)^*) dx`.
pub fn frobenius_pairing<T: Real>(phi: &Field<T>, b: &Field<T>) -> Result<T> {
    phi.pairing(b)
}

/// [`frobenius_pairing`] through Haar coefficients:
/// `|R| tr(m_R Φ (m_R B)^*) + Σ_I Σ_ε tr(Φ_I^ε (B_I^ε)^*)`.
pub fn frobenius_pairing_spectral<T: Real>(phi: &Field<T>, b: &Field<T>) -> Result<T> {
    phi.same_window(b)?;
    if phi.shape() != b.shape() {
        return Err(Error::Mismatch("pairing needs equal shapes".into()));
    }
    let (ps, bs) = (HaarSpectrum::analyze(phi), HaarSpectrum::analyze(b));
    let win = phi.window();
    let mut acc = ps.root().dot(bs.root()) * win.volume::<T>(0);
    for ((_, _, x), (_, _, y)) in ps.iter().zip(bs.iter()) {
        acc += x.dot(y);
    }
    Ok(acc)
}
