use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dyadic::{CubeId, Signature, Window};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::scalar::Real;

/// Haar coefficients `⟨F, h_I^ε⟩` of a step function on every cube above
/// leaf level, plus the average over the root.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarSpectrum<T: Real> {
    window: Window,
    rows: usize,
    cols: usize,
    root: DMatrix<T>,
    coeffs: Vec<DMatrix<T>>,
}

impl<T: Real> HaarSpectrum<T> {
    pub fn zeros(window: Window, rows: usize, cols: usize) -> Self {
        let count = window.interior_count() * ((1 << window.dim()) - 1);
        HaarSpectrum {
            root: DMatrix::zeros(rows, cols),
            coeffs: vec![DMatrix::zeros(rows, cols); count],
            window,
            rows,
            cols,
        }
    }

    /// Coefficients given cube by cube; the root average is zero.
    pub fn from_fn(
        window: Window,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(CubeId, Signature) -> DMatrix<T>,
    ) -> Self {
        let mut s = HaarSpectrum::zeros(window, rows, cols);
        let dim = s.window.dim();
        for id in s.window.clone().interior_cubes() {
            for eps in Signature::cancellative(dim) {
                *s.get_mut(id, eps) = f(id, eps);
            }
        }
        s
    }

    /// Exact analysis on leaves, from the average pyramid:
    /// `F_I^ε = |I|^{1/2} 2^{-d} Σ_c sign(c, ε) m_{child c} F`.
    pub fn analyze(f: &Field<T>) -> Self {
        let win = f.window().clone();
        let avg = f.averages();
        let dim = win.dim();
        let mut s = HaarSpectrum::zeros(win.clone(), f.rows(), f.cols());
        s.root = avg.get(win.root_id()).clone();
        let inv = T::lit(1.0 / (1u64 << dim) as f64);
        for id in win.interior_cubes() {
            let scale = win.volume::<T>(id.level).sqrt() * inv;
            for eps in Signature::cancellative(dim) {
                let mut acc = DMatrix::zeros(f.rows(), f.cols());
                for (c, child) in win.children(id).enumerate() {
                    acc += avg.get(child) * T::lit(eps.sign_on_child(c as u32, dim));
                }
                *s.get_mut(id, eps) = acc * scale;
            }
        }
        s
    }

    /// The step function `m_root F + Σ F_I^ε h_I^ε`.
    pub fn synthesize(&self) -> Field<T> {
        let win = &self.window;
        let dim = win.dim();
        let mut values = vec![DMatrix::zeros(self.rows, self.cols); win.cube_count()];
        values[0] = self.root.clone();
        for id in win.interior_cubes() {
            let here = values[win.linear(id)].clone();
            let scale = win.volume::<T>(id.level).sqrt().recip();
            for (c, child) in win.children(id).enumerate() {
                let mut v = here.clone();
                for eps in Signature::cancellative(dim) {
                    v += self.get(id, eps) * (T::lit(eps.sign_on_child(c as u32, dim)) * scale);
                }
                values[win.linear(child)] = v;
            }
        }
        let off = win.level_offset(win.depth());
        let leaves = values.split_off(off);
        Field::new(win.clone(), leaves).expect("spectrum shape is consistent")
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn root(&self) -> &DMatrix<T> {
        &self.root
    }

    pub fn set_root(&mut self, m: DMatrix<T>) {
        self.root = m;
    }

    fn slot(&self, id: CubeId, eps: Signature) -> usize {
        debug_assert!(
            id.level < self.window.depth(),
            "leaves carry no Haar functions"
        );
        debug_assert!(eps.is_cancellative(self.window.dim()));
        self.window.linear(id) * ((1 << self.window.dim()) - 1) + eps.index()
    }

    pub fn get(&self, id: CubeId, eps: Signature) -> &DMatrix<T> {
        &self.coeffs[self.slot(id, eps)]
    }

    pub fn get_mut(&mut self, id: CubeId, eps: Signature) -> &mut DMatrix<T> {
        let k = self.slot(id, eps);
        &mut self.coeffs[k]
    }

    /// Every `(I, ε, F_I^ε)`, coarse to fine.
    pub fn iter(&self) -> impl Iterator<Item = (CubeId, Signature, &DMatrix<T>)> + '_ {
        let dim = self.window.dim();
        self.window
            .interior_cubes()
            .flat_map(move |id| Signature::cancellative(dim).map(move |e| (id, e, self.get(id, e))))
    }

    /// Coefficient-wise map; the root becomes zero.
    pub fn map_coeffs(&self, f: impl Fn(CubeId, Signature, &DMatrix<T>) -> DMatrix<T>) -> Self {
        let first = self.iter().next().map(|(i, e, m)| f(i, e, m));
        let (rows, cols) = first.map(|m| m.shape()).unwrap_or((self.rows, self.cols));
        let mut out = HaarSpectrum::zeros(self.window.clone(), rows, cols);
        for (id, eps, m) in self.iter() {
            *out.get_mut(id, eps) = f(id, eps, m);
        }
        out
    }

    /// `Σ ‖F_I^ε‖_F²`, the cancellative part of `‖F‖²_{L²}`.
    pub fn cancellative_norm_sq(&self) -> T {
        let mut acc = T::zero();
        for m in &self.coeffs {
            acc += m.norm_squared();
        }
        acc
    }

    /// `∫ ‖F‖_F²` by Parseval.
    pub fn norm_sq(&self) -> T {
        self.root.norm_squared() * self.window.volume::<T>(0) + self.cancellative_norm_sq()
    }

    /// Largest entry in absolute value, root included.
    pub fn amax(&self) -> T {
        self.coeffs
            .iter()
            .fold(self.root.amax(), |a, m| a.max(m.amax()))
    }

    /// Errors if any coefficient below `max_level` exceeds a relative
    /// tolerance, otherwise zeroes those coefficients.
    pub fn require_headroom(&mut self, max_level: u32) -> Result<()> {
        let tol = T::lit(1e-12) * self.amax().max(T::lit(1e-300));
        let dim = self.window.dim();
        for level in max_level + 1..self.window.depth() {
            for id in self.window.cubes_at(level) {
                for eps in Signature::cancellative(dim) {
                    let m = self.get_mut(id, eps);
                    if m.amax() > tol {
                        return Err(Error::Headroom {
                            level,
                            max: max_level,
                        });
                    }
                    m.fill(T::zero());
                }
            }
        }
        Ok(())
    }

    /// Writes one JSON object per coefficient: cube address, signature bits
    /// and the row-major entries as real and imaginary parts.
    pub fn dump_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            cube: String,
            signature: String,
            rows: usize,
            cols: usize,
            re: Vec<f64>,
            im: &'a [f64],
        }
        let zeros = vec![0.0; self.rows * self.cols];
        let dim = self.window.dim();
        let root = std::iter::once((self.window.root_id(), Signature::ones(dim), &self.root));
        for (id, eps, m) in root.chain(self.iter()) {
            let re = (0..self.rows)
                .flat_map(|r| (0..self.cols).map(move |c| m[(r, c)].to_f64_lossy()))
                .collect();
            let line = Line {
                cube: self.window.address(id),
                signature: eps.bits_string(dim),
                rows: self.rows,
                cols: self.cols,
                re,
                im: &zeros,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
