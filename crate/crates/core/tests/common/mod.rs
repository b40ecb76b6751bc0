//! Brute-force scalar (`n = 1`, `d = 1`) versions of the library's
//! quantities, written directly from their defining formulas on leaf values.
//! Nothing here goes through the library's spectra, tables or averages.

#![allow(dead_code)]

use nalgebra::DMatrix;

/// Leaf values of a scalar step function on `[0, 1)` with `2^depth` leaves.
#[derive(Clone, Debug)]
pub struct Scalar {
    pub depth: u32,
    pub v: Vec<f64>,
}

/// Dyadic interval `[j 2^{-k}, (j + 1) 2^{-k})` as leaf index range and length.
#[derive(Clone, Copy, Debug)]
pub struct Interval {
    pub level: u32,
    pub index: usize,
}

impl Interval {
    pub fn len(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }
}

impl Scalar {
    pub fn new(depth: u32, v: Vec<f64>) -> Self {
        assert_eq!(v.len(), 1 << depth);
        Scalar { depth, v }
    }

    pub fn leaves(&self, i: Interval) -> std::ops::Range<usize> {
        let w = 1usize << (self.depth - i.level);
        i.index * w..(i.index + 1) * w
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..=self.depth)
            .flat_map(|level| (0..1usize << level).map(move |index| Interval { level, index }))
            .collect()
    }

    /// Intervals with two children.
    pub fn parents(&self) -> Vec<Interval> {
        self.intervals()
            .into_iter()
            .filter(|i| i.level < self.depth)
            .collect()
    }

    pub fn mean_of(&self, i: Interval, f: impl Fn(usize, f64) -> f64) -> f64 {
        let r = self.leaves(i);
        let n = r.len() as f64;
        r.map(|x| f(x, self.v[x])).sum::<f64>() / n
    }

    pub fn mean(&self, i: Interval) -> f64 {
        self.mean_of(i, |_, v| v)
    }

    /// `⟨f, h_I⟩` with `h_I = |I|^{-1/2}(χ_left - χ_right)`.
    pub fn haar(&self, i: Interval) -> f64 {
        let l = Interval {
            level: i.level + 1,
            index: 2 * i.index,
        };
        let r = Interval {
            level: i.level + 1,
            index: 2 * i.index + 1,
        };
        i.len().sqrt() * (self.mean(l) - self.mean(r)) / 2.0
    }

    pub fn contains(outer: Interval, inner: Interval) -> bool {
        inner.level >= outer.level && (inner.index >> (inner.level - outer.level)) == outer.index
    }

    pub fn inside(&self, j: Interval) -> Vec<Interval> {
        self.parents()
            .into_iter()
            .filter(|&i| Scalar::contains(j, i))
            .collect()
    }
}

pub fn sup(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// `sup_I ⨍ w (⨍ w^{-1/(p-1)})^{p-1}`.
pub fn ap(w: &Scalar, p: f64) -> f64 {
    sup(w
        .intervals()
        .into_iter()
        .map(|i| w.mean(i) * w.mean_of(i, |_, v| v.powf(-1.0 / (p - 1.0))).powf(p - 1.0)))
}

/// `V_I(w, p) = (⨍ w)^{1/p}` and `V'_I(w, p) = (⨍ w^{1-p'})^{1/p'}`.
pub fn v(w: &Scalar, i: Interval, p: f64) -> f64 {
    w.mean(i).powf(1.0 / p)
}

pub fn v_dual(w: &Scalar, i: Interval, p: f64) -> f64 {
    let q = p / (p - 1.0);
    w.mean_of(i, |_, x| x.powf(1.0 - q)).powf(1.0 / q)
}

/// Carleson testing condition: `V_I(w)`/`V_K(u)` for `p ≥ 2`, dual operators
/// with the roles of the weights exchanged for `p < 2`.
pub fn carleson(b: &Scalar, w: &Scalar, u: &Scalar, p: f64) -> f64 {
    sup(b.intervals().into_iter().map(|k| {
        let s: f64 = b
            .inside(k)
            .into_iter()
            .map(|i| {
                let (outer, inner) = if p >= 2.0 {
                    (v(w, i, p), v(u, k, p))
                } else {
                    (v_dual(u, i, p), v_dual(w, k, p))
                };
                (outer * b.haar(i) / inner).powi(2)
            })
            .sum();
        s / k.len()
    }))
}

pub fn condition_b(b: &Scalar, w: &Scalar, u: &Scalar, p: f64) -> f64 {
    sup(b.intervals().into_iter().map(|j| {
        let s: f64 = b
            .inside(j)
            .into_iter()
            .map(|i| (v(w, i, p) * b.haar(i) / v(u, i, p)).powi(2))
            .sum();
        s / j.len()
    }))
}

/// `Σ_{I ⊆ J} m_I(u^{-1})² m_I(w) b_I² ≤ C |J| m_J(u^{-1})`.
pub fn hlw(b: &Scalar, w: &Scalar, u: &Scalar) -> f64 {
    sup(b.intervals().into_iter().map(|j| {
        let s: f64 = b
            .inside(j)
            .into_iter()
            .map(|i| u.mean_of(i, |_, x| 1.0 / x).powi(2) * w.mean(i) * b.haar(i).powi(2))
            .sum();
        s / (j.len() * u.mean_of(j, |_, x| 1.0 / x))
    }))
}

/// `⨍_J w |b - m_J b|^p / ⨍_J u`.
pub fn bloom_bprime(b: &Scalar, w: &Scalar, u: &Scalar, p: f64) -> f64 {
    sup(b.intervals().into_iter().map(|j| {
        let m = b.mean(j);
        b.mean_of(j, |x, bx| w.v[x] * (bx - m).abs().powf(p)) / u.mean(j)
    }))
}

/// `⨍_J u^{1-p'} |b - m_J b|^{p'} / ⨍_J w^{1-p'}`.
pub fn bloom_cprime(b: &Scalar, w: &Scalar, u: &Scalar, p: f64) -> f64 {
    let q = p / (p - 1.0);
    sup(b.intervals().into_iter().map(|j| {
        let m = b.mean(j);
        b.mean_of(j, |x, bx| u.v[x].powf(1.0 - q) * (bx - m).abs().powf(q))
            / w.mean_of(j, |_, y| y.powf(1.0 - q))
    }))
}

/// `(FKP, Buckley)`: `|J|^{-1} Σ (w_I / m_I w)²` and `Σ w_I² / m_I w ≤ C |J| m_J w`.
pub fn fkp_buckley(w: &Scalar) -> (f64, f64) {
    let fkp = sup(w.intervals().into_iter().map(|j| {
        w.inside(j)
            .into_iter()
            .map(|i| (w.haar(i) / w.mean(i)).powi(2))
            .sum::<f64>()
            / j.len()
    }));
    let buckley = sup(w.intervals().into_iter().map(|j| {
        w.inside(j)
            .into_iter()
            .map(|i| w.haar(i).powi(2) / w.mean(i))
            .sum::<f64>()
            / (j.len() * w.mean(j))
    }));
    (fkp, buckley)
}

/// `∫ (Σ_I φ_I² m_I u χ_I / (w |I|))^{1/2}`.
pub fn h1(phi: &Scalar, w: &Scalar, u: &Scalar) -> f64 {
    let n = phi.v.len();
    let mut s = vec![0.0; n];
    for i in phi.parents() {
        let c = phi.haar(i).powi(2) * u.mean(i) / i.len();
        for x in phi.leaves(i) {
            s[x] += c;
        }
    }
    s.iter()
        .zip(&w.v)
        .map(|(a, wx)| (a / wx).sqrt())
        .sum::<f64>()
        / n as f64
}

/// `‖π_b‖_{L²(u) → L²(w)}` from the matrix of `π_b f = Σ_I b_I m_I f h_I`
/// built by evaluating Haar functions on leaves.
pub fn paraproduct_norm(b: &Scalar, w: &Scalar, u: &Scalar) -> f64 {
    let n = b.v.len();
    let vol = 1.0 / n as f64;
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in b.parents() {
        let r = b.leaves(i);
        let half = r.start + r.len() / 2;
        let h = |x: usize| if x < half { 1.0 } else { -1.0 } / i.len().sqrt();
        let bi = b.haar(i);
        for x in r.clone() {
            for y in r.clone() {
                t[(x, y)] += bi * h(x) * vol / i.len();
            }
        }
    }
    let m = DMatrix::from_fn(n, n, |x, y| {
        (vol * w.v[x]).sqrt() * t[(x, y)] / (vol * u.v[y]).sqrt()
    });
    m.singular_values().max()
}

/// `(left, right)` of the `p = 2` John-Nirenberg pair:
/// `⨍|b - m b|^{1+ε} / (m w)^{1+ε}` and `⨍ w^{-1}|b - m b|² / m w`.
pub fn jn_pair(b: &Scalar, w: &Scalar, eps: f64) -> (f64, f64) {
    let left = sup(b.intervals().into_iter().map(|i| {
        let m = b.mean(i);
        b.mean_of(i, |_, bx| (bx - m).abs().powf(1.0 + eps)) / w.mean(i).powf(1.0 + eps)
    }));
    let right = sup(b.intervals().into_iter().map(|i| {
        let m = b.mean(i);
        b.mean_of(i, |x, bx| (bx - m).powi(2) / w.v[x]) / w.mean(i)
    }));
    (left, right)
}

/// `(weighted, plain)`: `⨍ w|f - m f|^p / ⨍ w` and `⨍ |f - m f|^p`.
pub fn vector_jn(f: &Scalar, w: &Scalar, p: f64) -> (f64, f64) {
    let weighted = sup(f.intervals().into_iter().map(|i| {
        let m = f.mean(i);
        f.mean_of(i, |x, fx| w.v[x] * (fx - m).abs().powf(p)) / w.mean(i)
    }));
    let plain = sup(f.intervals().into_iter().map(|i| {
        let m = f.mean(i);
        f.mean_of(i, |_, fx| (fx - m).abs().powf(p))
    }));
    (weighted, plain)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
