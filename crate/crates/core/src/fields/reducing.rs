use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{ap_characteristic_in_window, check_exponent, conjugate};
use super::Field;
use crate::dyadic::{CubeId, DyadicCube, Window};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// How the operators in a [`ReducingTable`] were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// `p = 2`: square roots of averages, no approximation.
    ExactAverage,
    /// Least-squares ellipsoid fitted to the `L^p` average norm on a net.
    Ellipsoid,
}

/// Unit directions used to fit and check reducing operators in dimension `n`.
///
/// One direction for `n = 1`, 64 equally spaced angles on the half circle for
/// `n = 2`, 512 Fibonacci points on the upper hemisphere for `n = 3` and
/// `128 n` seeded random directions beyond that.
pub fn direction_net<T: Real>(n: usize) -> Vec<DVector<T>> {
    let raw: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0]],
        2 => (0..64)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 64.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..512)
                .map(|k| {
                    let z = 1.0 - (k as f64 + 0.5) / 512.0;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + n as u64);
            (0..128 * n)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                    v.into_iter().map(|x| x / norm).collect()
                })
                .collect()
        }
    };
    raw.into_iter()
        .map(|v| DVector::from_iterator(n, v.into_iter().map(T::lit)))
        .collect()
}

/// Fits `ρ(e)² ≈ eᵀ M e` over a fixed net.
struct Fitter<T: Real> {
    n: usize,
    net: Vec<DVector<T>>,
    pinv: DMatrix<T>,
}

impl<T: Real> Fitter<T> {
    fn new(n: usize) -> Self {
        let net = direction_net::<T>(n);
        let params = n * (n + 1) / 2;
        let mut design = DMatrix::zeros(net.len(), params);
        for (r, e) in net.iter().enumerate() {
            let mut c = 0;
            for i in 0..n {
                for j in i..n {
                    let f = if i == j { T::one() } else { T::lit(2.0) };
                    design[(r, c)] = f * e[i] * e[j];
                    c += 1;
                }
            }
        }
        let pinv = design
            .pseudo_inverse(T::lit(1e-12))
            .expect("net spans symmetric matrices");
        Fitter { n, net, pinv }
    }

    /// Operator `V` with `|V e| ≈ ρ(e)` and the realized two-sided constant.
    fn fit(&self, rho: &[T]) -> Result<(DMatrix<T>, T)> {
        let n = self.n;
        let sq = DVector::from_iterator(rho.len(), rho.iter().map(|r| *r * *r));
        let params = &self.pinv * &sq;
        let mut m = DMatrix::zeros(n, n);
        let mut c = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = params[c];
                m[(j, i)] = params[c];
                c += 1;
            }
        }
        let scale = sq.max();
        if !(linalg::min_eigenvalue(&m) > T::lit(1e-10) * scale) {
            // Second moment of the net, always positive definite.
            m = DMatrix::zeros(n, n);
            for (e, s) in self.net.iter().zip(sq.iter()) {
                m += e * e.transpose() * *s;
            }
            m *= T::from_usize_lossy(n) / T::from_usize_lossy(self.net.len());
        }
        let v = linalg::spd_sqrt(&m)?;
        let mut kappa = T::one();
        for (e, r) in self.net.iter().zip(rho) {
            let ve = (&v * e).norm();
            kappa = kappa.max(*r / ve).max(ve / *r);
        }
        Ok((v, kappa))
    }
}

/// Reducing operators `V_I(W,p)` (or the dual `V'_I(W,p)`) on every cube of
/// a window, with inverses.
#[derive(Clone, Debug)]
pub struct ReducingTable<T: Real> {
    window: Window,
    p: T,
    dual: bool,
    provenance: Provenance,
    kappa: T,
    ops: Vec<DMatrix<T>>,
    inverses: Vec<DMatrix<T>>,
}

impl<T: Real> ReducingTable<T> {
    /// `|V_I e| ≈ (⨍_I |W^{1/p}(x) e|^p dx)^{1/p}` for every cube `I`.
    pub fn primal(w: &Field<T>, p: T) -> Result<Self> {
        Self::build(w, p, false)
    }

    /// `|V'_I e| ≈ (⨍_I |W^{-1/p}(x) e|^{p'} dx)^{1/p'}` for every cube `I`.
    pub fn dual(w: &Field<T>, p: T) -> Result<Self> {
        Self::build(w, p, true)
    }

    pub fn build(w: &Field<T>, p: T, dual: bool) -> Result<Self> {
        check_exponent(p)?;
        w.check_weight()?;
        let win = w.window().clone();
        let ops = if p == T::lit(2.0) {
            let src = if dual { w.inverse()? } else { w.clone() };
            let avg = src.averages();
            let ops = avg
                .as_slice()
                .par_iter()
                .map(linalg::spd_sqrt)
                .collect::<Result<Vec<_>>>()?;
            (ops, T::one(), Provenance::ExactAverage)
        } else {
            let (s, q) = if dual {
                (-p.recip(), conjugate(p))
            } else {
                (p.recip(), p)
            };
            let a = w.pointwise_power(s)?;
            let fitter = Fitter::new(w.rows());
            // Per net direction, cube averages of |A(x) e|^q.
            let moments: Vec<Field<T>> = fitter
                .net
                .iter()
                .map(|e| a.map(|m| DMatrix::from_element(1, 1, (m * e).norm().powf(q))))
                .collect();
            let pyramids: Vec<_> = moments.iter().map(|f| f.averages()).collect();
            let fitted = (0..win.cube_count())
                .into_par_iter()
                .map(|lin| {
                    let rho: Vec<T> = pyramids
                        .iter()
                        .map(|pyr| pyr.as_slice()[lin][(0, 0)].powf(q.recip()))
                        .collect();
                    fitter.fit(&rho)
                })
                .collect::<Result<Vec<_>>>()?;
            let kappa = fitted.iter().fold(T::one(), |k, (_, c)| k.max(*c));
            (
                fitted.into_iter().map(|(v, _)| v).collect(),
                kappa,
                Provenance::Ellipsoid,
            )
        };
        let (ops, kappa, provenance) = ops;
        let inverses = ops
            .par_iter()
            .map(linalg::spd_inverse)
            .collect::<Result<Vec<_>>>()?;
        Ok(ReducingTable {
            window: win,
            p,
            dual,
            provenance,
            kappa,
            ops,
            inverses,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn is_dual(&self) -> bool {
        self.dual
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Largest ratio `max(ρ/|Ve|, |Ve|/ρ)` seen on the net; 1 for exact tables.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn get(&self, id: CubeId) -> &DMatrix<T> {
        &self.ops[self.window.linear(id)]
    }

    pub fn inverse(&self, id: CubeId) -> &DMatrix<T> {
        &self.inverses[self.window.linear(id)]
    }
}

/// The reducing operator of a single cube.
pub fn reducing_operator<T: Real>(
    w: &Field<T>,
    cube: &DyadicCube,
    p: T,
    dual: bool,
) -> Result<DMatrix<T>> {
    let id = w.window().locate(cube)?;
    check_exponent(p)?;
    w.check_weight()?;
    let range = w.window().leaf_range(id);
    let len = T::from_usize_lossy(range.len());
    if p == T::lit(2.0) {
        let mut acc = DMatrix::zeros(w.rows(), w.rows());
        for m in &w.leaves()[range] {
            acc += if dual {
                linalg::spd_inverse(m)?
            } else {
                m.clone()
            };
        }
        return linalg::spd_sqrt(&(acc / len));
    }
    let (s, q) = if dual {
        (-p.recip(), conjugate(p))
    } else {
        (p.recip(), p)
    };
    let powers = w.leaves()[range]
        .iter()
        .map(|m| linalg::spd_power(m, s))
        .collect::<Result<Vec<_>>>()?;
    let fitter = Fitter::new(w.rows());
    let rho: Vec<T> = fitter
        .net
        .iter()
        .map(|e| {
            let mut acc = T::zero();
            for a in &powers {
                acc += (a * e).norm().powf(q);
            }
            (acc / len).powf(q.recip())
        })
        .collect();
    Ok(fitter.fit(&rho)?.0)
}

/// Ratios `|V'_I e| / |m_I(W^{-1/p}) e|` over the direction net.
#[derive(Clone, Debug, Serialize)]
pub struct ComparabilityReport {
    pub p: f64,
    pub cubes: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub characteristic: f64,
    pub kappa: f64,
    /// `1/κ` up to rounding: the lower end allowed for a fitted table.
    pub lower_bound: f64,
    /// `characteristic^{n/p} κ`.
    pub upper_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Checks that `|m_I(W^{-1/p}) e| ≤ |V'_I e| ≤ ‖W‖_{A_p}^{n/p} |m_I(W^{-1/p}) e|`
/// holds on the given cubes, allowing the realized fitting constant `κ`.
pub fn verify_reducing_comparability<T: Real>(
    w: &Field<T>,
    p: T,
    cubes: &[CubeId],
) -> Result<ComparabilityReport> {
    let table = ReducingTable::dual(w, p)?;
    let neg = w.pointwise_power(-p.recip())?.averages();
    let characteristic = ap_characteristic_in_window(w, p, None)?
        .value
        .to_f64_lossy();
    let net = direction_net::<T>(w.rows());
    let (mut lo, mut hi) = (f64::INFINITY, 0f64);
    for &id in cubes {
        if id.level > w.window().depth() {
            return Err(Error::OutsideWindow(format!("{id:?}")));
        }
        let v = table.get(id);
        let m = neg.get(id);
        for e in &net {
            let r = ((v * e).norm() / (m * e).norm()).to_f64_lossy();
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    let kappa = table.kappa().to_f64_lossy();
    let p = p.to_f64_lossy();
    let lower_bound = (1.0 - 1e-9) / kappa;
    let upper_bound = characteristic.powf(w.rows() as f64 / p) * kappa * (1.0 + 1e-9);
    Ok(ComparabilityReport {
        p,
        cubes: cubes.len(),
        min_ratio: lo,
        max_ratio: hi,
        characteristic,
        kappa,
        lower_bound,
        upper_bound,
        lower_ok: lo >= lower_bound,
        upper_ok: hi <= upper_bound,
    })
}
