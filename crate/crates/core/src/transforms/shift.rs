use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::paraproduct::{dual_paraproduct_spectra, paraproduct_spectrum};
use super::HaarSpectrum;
use crate::dyadic::{CubeId, Signature, Window};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::scalar::Real;

/// A Haar shift `Q h_I^ε = h_{σ(I)}^{σ_I(ε)}` where `σ(I)` is a child of `I`.
///
/// The shift is defined on cubes at most `depth - 2` levels below the root so
/// that images still carry Haar functions and `σ(σ(I))` exists whenever the
/// inputs leave the finest Haar level empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftMap {
    window: Window,
    children: Vec<u32>,
    signatures: Vec<Signature>,
}

impl ShiftMap {
    pub fn from_fn(
        window: Window,
        mut child: impl FnMut(CubeId) -> u32,
        mut signature: impl FnMut(CubeId, Signature) -> Signature,
    ) -> Result<Self> {
        if window.depth() < 2 {
            return Err(Error::InvalidParameter(
                "Haar shifts need depth >= 2".into(),
            ));
        }
        let dim = window.dim();
        let top = window.depth() - 2;
        let mut children = Vec::new();
        let mut signatures = Vec::new();
        for level in 0..=top {
            for id in window.cubes_at(level) {
                let c = child(id);
                if c >= 1 << dim {
                    return Err(Error::InvalidParameter(format!("child index {c}")));
                }
                children.push(c);
                for eps in Signature::cancellative(dim) {
                    let s = signature(id, eps);
                    if !s.is_cancellative(dim) {
                        return Err(Error::InvalidParameter(
                            "shift must keep signatures cancellative".into(),
                        ));
                    }
                    signatures.push(s);
                }
            }
        }
        Ok(ShiftMap {
            window,
            children,
            signatures,
        })
    }

    /// Random child per cube; signatures permuted per cube when `injective`,
    /// drawn independently otherwise.
    pub fn random(window: Window, seed: u64, injective: bool) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = window.dim();
        let count = (1u32 << dim) - 1;
        let mut perms: Vec<Vec<u32>> = Vec::new();
        let cubes = window.level_offset(window.depth().saturating_sub(1));
        let mut children = Vec::with_capacity(cubes);
        for _ in 0..cubes {
            children.push(rng.random_range(0..1u32 << dim));
            let mut p: Vec<u32> = (0..count).collect();
            if injective {
                p.shuffle(&mut rng);
            } else {
                p.iter_mut().for_each(|x| *x = rng.random_range(0..count));
            }
            perms.push(p);
        }
        let lin = |w: &Window, id: CubeId| w.linear(id);
        let w2 = window.clone();
        ShiftMap::from_fn(
            window,
            |id| children[lin(&w2, id)],
            |id, eps| Signature(perms[lin(&w2, id)][eps.index()]),
        )
    }

    /// `σ(I)` is always the first child and signatures are kept.
    pub fn first_child(window: Window) -> Result<Self> {
        ShiftMap::from_fn(window, |_| 0, |_, e| e)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Finest level on which the shift acts.
    pub fn top_level(&self) -> u32 {
        self.window.depth() - 2
    }

    pub fn child_position(&self, id: CubeId) -> u32 {
        self.children[self.window.linear(id)]
    }

    pub fn child(&self, id: CubeId) -> CubeId {
        self.window.child(id, self.child_position(id))
    }

    pub fn signature(&self, id: CubeId, eps: Signature) -> Signature {
        let per = (1 << self.window.dim()) - 1;
        self.signatures[self.window.linear(id) * per + eps.index()]
    }

    pub fn is_injective(&self) -> bool {
        let dim = self.window.dim();
        let per = (1usize << dim) - 1;
        self.signatures.chunks(per).all(|c| {
            let mut seen = vec![false; per];
            c.iter()
                .all(|s| !std::mem::replace(&mut seen[s.index()], true))
        })
    }

    /// `Q` on coefficients. Content below [`ShiftMap::top_level`] is an error.
    pub fn apply<T: Real>(&self, s: &HaarSpectrum<T>) -> Result<HaarSpectrum<T>> {
        if s.window() != &self.window {
            return Err(Error::Mismatch("shift and spectrum windows differ".into()));
        }
        let mut s = s.clone();
        s.require_headroom(self.top_level())?;
        let mut out = HaarSpectrum::zeros(self.window.clone(), s.rows(), s.cols());
        let dim = self.window.dim();
        for level in 0..=self.top_level() {
            for id in self.window.cubes_at(level) {
                let j = self.child(id);
                for eps in Signature::cancellative(dim) {
                    *out.get_mut(j, self.signature(id, eps)) += s.get(id, eps);
                }
            }
        }
        Ok(out)
    }
}

/// `Q_σ f`.
pub fn haar_shift<T: Real>(sigma: &ShiftMap, f: &Field<T>) -> Result<Field<T>> {
    Ok(sigma.apply(&HaarSpectrum::analyze(f))?.synthesize())
}

/// `[B, Q] f = B Q f - Q(B f)`, with `B` and `f` free of finest-level Haar
/// content.
pub fn shift_commutator<T: Real>(b: &Field<T>, sigma: &ShiftMap, f: &Field<T>) -> Result<Field<T>> {
    let (_, _) = headroom_spectra(b, sigma, f)?;
    let qf = haar_shift(sigma, f)?;
    let bqf = b.mul(&qf)?;
    let qbf = haar_shift(sigma, &b.mul(f)?)?;
    bqf.sub(&qbf)
}

/// The pieces of `[B, Q] f` after expanding `B` and `f` in Haar functions and
/// splitting by the relative position of the two cubes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorTerm {
    /// `I' = I`, first part: `Σ B_I^{ε'} f_I^ε h_I^{ε'}|_{σ(I)} h_{σ(I)}^{σ(ε)}`.
    ShiftedDiagonal,
    /// `I' = I`, `ε ≠ ε'`: `-Σ B_I^{ε'} f_I^ε |I|^{-1/2} Q h_I^{ψ}`.
    DiagonalMultiplier,
    /// `I' = I`, `ε = ε'`: `-Q (π_{B*})* f`.
    ShiftOfDualParaproduct,
    /// `I' = σ(I)`, `ε' = σ(ε)`: `(π_{B*})* Q f`.
    DualParaproductOfShift,
    /// `I' = σ(I)`, `ε' ≠ σ(ε)`:
    /// `Σ B_{σ(I)}^{ε'} f_I^ε |σ(I)|^{-1/2} h_{σ(I)}^{ψ}`.
    ChildMultiplier,
    /// `I' = σ(I)`, second part:
    /// `-Σ B_{σ(I)}^{ε'} f_I^ε h_I^ε|_{σ(I)} Q h_{σ(I)}^{ε'}`.
    SecondGenerationShift,
    /// `I' ⊊ I`, `I' ≠ σ(I)`, second part, root average included:
    /// `-Q π_B f` minus the second generation term.
    ShiftOfParaproduct,
    /// `I' ⊊ σ(I)`: `π_B Q f`.
    ParaproductOfShift,
}

impl CommutatorTerm {
    pub const ALL: [CommutatorTerm; 8] = [
        CommutatorTerm::ShiftedDiagonal,
        CommutatorTerm::DiagonalMultiplier,
        CommutatorTerm::ShiftOfDualParaproduct,
        CommutatorTerm::DualParaproductOfShift,
        CommutatorTerm::ChildMultiplier,
        CommutatorTerm::SecondGenerationShift,
        CommutatorTerm::ShiftOfParaproduct,
        CommutatorTerm::ParaproductOfShift,
    ];
}

fn headroom_spectra<T: Real>(
    b: &Field<T>,
    sigma: &ShiftMap,
    f: &Field<T>,
) -> Result<(HaarSpectrum<T>, HaarSpectrum<T>)> {
    b.same_window(f)?;
    if b.window() != sigma.window() {
        return Err(Error::Mismatch(
            "shift and fields live on different windows".into(),
        ));
    }
    if b.cols() != f.rows() {
        return Err(Error::Mismatch("symbol and function shapes differ".into()));
    }
    let mut bs = HaarSpectrum::analyze(b);
    let mut fs = HaarSpectrum::analyze(f);
    bs.require_headroom(sigma.top_level())?;
    fs.require_headroom(sigma.top_level())?;
    Ok((bs, fs))
}

/// The labelled terms of `[B, Q] f`; they add up to [`shift_commutator`].
pub fn shift_commutator_terms<T: Real>(
    b: &Field<T>,
    sigma: &ShiftMap,
    f: &Field<T>,
) -> Result<Vec<(CommutatorTerm, Field<T>)>> {
    let (bs, fs) = headroom_spectra(b, sigma, f)?;
    let win = b.window().clone();
    let dim = win.dim();
    let (rows, cols) = (b.rows(), f.cols());
    let top = sigma.top_level();
    let zero = || HaarSpectrum::<T>::zeros(win.clone(), rows, cols);
    let neg = |x: Field<T>| x.scale(-T::one());

    let mut shifted_diag = zero();
    let mut diag_mult = zero();
    let mut child_mult = zero();
    let mut second_gen = zero();
    for level in 0..=top {
        let inv = win.volume::<T>(level).sqrt().recip();
        let inv_child = win.volume::<T>(level + 1).sqrt().recip();
        for id in win.cubes_at(level) {
            let c = sigma.child_position(id);
            let child = sigma.child(id);
            for eps in Signature::cancellative(dim) {
                let fe = fs.get(id, eps);
                let se = sigma.signature(id, eps);
                let mut first = DMatrix::zeros(rows, cols);
                for e2 in Signature::cancellative(dim) {
                    let bf = bs.get(id, e2) * fe;
                    first += &bf * (T::lit(e2.sign_on_child(c, dim)) * inv);
                    if e2 != eps {
                        *diag_mult.get_mut(id, eps.product(e2, dim)) += bf * inv;
                    }
                    if child.level < win.depth() {
                        let bc = bs.get(child, e2) * fe;
                        if e2 != se {
                            *child_mult.get_mut(child, e2.product(se, dim)) += &bc * inv_child;
                        }
                        *second_gen.get_mut(child, e2) +=
                            bc * (T::lit(eps.sign_on_child(c, dim)) * inv);
                    }
                }
                *shifted_diag.get_mut(child, se) += first;
            }
        }
    }

    let qf = sigma.apply(&fs)?;
    let qf_field = qf.synthesize();
    let dual = dual_paraproduct_spectra(&bs, &fs);
    let second = neg(sigma.apply(&second_gen)?.synthesize());
    let q_pi = sigma.apply(&paraproduct_spectrum(&bs, f))?.synthesize();
    Ok(vec![
        (CommutatorTerm::ShiftedDiagonal, shifted_diag.synthesize()),
        (
            CommutatorTerm::DiagonalMultiplier,
            neg(sigma.apply(&diag_mult)?.synthesize()),
        ),
        (
            CommutatorTerm::ShiftOfDualParaproduct,
            neg(sigma.apply(&HaarSpectrum::analyze(&dual))?.synthesize()),
        ),
        (
            CommutatorTerm::DualParaproductOfShift,
            dual_paraproduct_spectra(&bs, &qf),
        ),
        (CommutatorTerm::ChildMultiplier, child_mult.synthesize()),
        (CommutatorTerm::ShiftOfParaproduct, neg(q_pi).sub(&second)?),
        (CommutatorTerm::SecondGenerationShift, second),
        (
            CommutatorTerm::ParaproductOfShift,
            paraproduct_spectrum(&bs, &qf_field).synthesize(),
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn headroom_field(win: &Window, seed: u64, rows: usize, cols: usize) -> Field<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Field::from_fn(win.clone(), |_| {
            DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
        })
        .unwrap();
        f.coarsen(win.depth() - 1)
    }

    #[test]
    fn single_mode_moves() {
        let win = Window::unit(1, 3).unwrap();
        let sigma = ShiftMap::first_child(win.clone()).unwrap();
        let f = Field::scalar(win.clone(), &[1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        let q = haar_shift(&sigma, &f).unwrap();
        let expect = [
            2f64.sqrt(),
            2f64.sqrt(),
            -(2f64.sqrt()),
            -(2f64.sqrt()),
            0.0,
            0.0,
            0.0,
            0.0,
        ];
        for (m, e) in q.leaves().iter().zip(expect) {
            assert!((m[(0, 0)] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn isometry_when_injective() {
        let win = Window::unit(2, 4).unwrap();
        let sigma = ShiftMap::random(win.clone(), 3, true).unwrap();
        assert!(sigma.is_injective());
        let f = headroom_field(&win, 1, 2, 1);
        let q = haar_shift(&sigma, &f).unwrap();
        let canc = HaarSpectrum::analyze(&f).cancellative_norm_sq();
        assert!((q.norm_sq() - canc).abs() < 1e-11);
    }

    #[test]
    fn headroom_is_enforced() {
        let win = Window::unit(1, 3).unwrap();
        let sigma = ShiftMap::first_child(win.clone()).unwrap();
        let f = Field::scalar(win, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            haar_shift(&sigma, &f),
            Err(Error::Headroom { .. })
        ));
    }

    #[test]
    fn terms_add_up() {
        let win = Window::unit(1, 6).unwrap();
        for seed in 0..5 {
            let sigma = ShiftMap::random(win.clone(), seed, seed % 2 == 0).unwrap();
            let b = headroom_field(&win, 100 + seed, 2, 2);
            let f = headroom_field(&win, 200 + seed, 2, 1);
            let direct = shift_commutator(&b, &sigma, &f).unwrap();
            let terms = shift_commutator_terms(&b, &sigma, &f).unwrap();
            let mut sum = Field::zeros(win.clone(), 2, 1);
            for (_, t) in &terms {
                sum = sum.add(t).unwrap();
            }
            let err = direct
                .sub(&sum)
                .unwrap()
                .leaves()
                .iter()
                .fold(0.0f64, |a, m| a.max(m.amax()));
            assert!(err < 1e-10, "seed {seed}: {err}");
        }
    }

    #[test]
    fn constant_symbol_commutes() {
        let win = Window::unit(2, 3).unwrap();
        let sigma = ShiftMap::random(win.clone(), 9, true).unwrap();
        let b = Field::constant(win.clone(), dmatrix![1.0, 2.0; 0.5, -1.0]);
        let f = headroom_field(&win, 4, 2, 1);
        let c = shift_commutator(&b, &sigma, &f).unwrap();
        assert!(c.leaves().iter().all(|m| m.amax() < 1e-12));
        for (_, t) in shift_commutator_terms(&b, &sigma, &f).unwrap() {
            assert!(t.leaves().iter().all(|m| m.amax() < 1e-12));
        }
    }
}
