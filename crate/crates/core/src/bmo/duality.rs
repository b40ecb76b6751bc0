use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{condition_b, frobenius_pairing, h1_norm, interior_descendants, Instance, WeightPair};
use crate::dyadic::{CubeId, Signature};
use crate::error::Result;
use crate::fields::{a2_averaged, Field};
use crate::linalg;
use crate::scalar::Real;
use crate::transforms::HaarSpectrum;

/// The H¹ bound for one testing element `S_{J,W,U}^*`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtremalCheck {
    pub cube: CubeId,
    pub h1: f64,
    /// `A_2(W)^{1/2} |J|^{1/2}`.
    pub bound: f64,
    pub ok: bool,
}

/// `S_{J,W,U}^* = Σ_{I ⊆ J} Σ_ε (m_I W)^{1/2} (S_I^ε)^* (m_I U)^{-1/2} h_I^ε`,
/// with `{S_I^ε}_{I ⊆ J}` rescaled to unit `ℓ²` (Frobenius) norm. Entries of
/// `s` outside `J` are ignored. Returns `None` when they all vanish.
pub fn extremal_element<T: Real>(
    w: &Field<T>,
    u: &Field<T>,
    j: CubeId,
    s: &HaarSpectrum<T>,
) -> Result<Option<Field<T>>> {
    w.same_window(u)?;
    let win = w.window().clone();
    let dim = win.dim();
    let (wa, ua) = (w.averages(), u.averages());
    let mut total = T::zero();
    for i in interior_descendants(&win, j) {
        for e in Signature::cancellative(dim) {
            total += s.get(i, e).norm_squared();
        }
    }
    if total <= T::zero() {
        return Ok(None);
    }
    let scale = total.sqrt().recip();
    let n = w.rows();
    let mut out = HaarSpectrum::zeros(win.clone(), n, n);
    for i in interior_descendants(&win, j) {
        let l = linalg::spd_sqrt(wa.get(i))?;
        let r = linalg::spd_power(ua.get(i), T::lit(-0.5))?;
        for e in Signature::cancellative(dim) {
            *out.get_mut(i, e) = &l * s.get(i, e).transpose() * &r * scale;
        }
    }
    Ok(Some(out.synthesize()))
}

/// Measures `‖S_{J,W,U}^*‖_{H¹}` against `A_2(W)^{1/2} |J|^{1/2}`, where
/// `A_2(W)` is the averaged characteristic `sup_I ‖(m_I W)^{1/2}(m_I W^{-1})^{1/2}‖²`.
pub fn extremal_check<T: Real>(
    w: &Field<T>,
    u: &Field<T>,
    j: CubeId,
    s: &HaarSpectrum<T>,
    a2: T,
) -> Result<Option<ExtremalCheck>> {
    let Some(phi) = extremal_element(w, u, j, s)? else {
        return Ok(None);
    };
    let h1 = h1_norm(&phi, w, u)?.to_f64_lossy();
    let bound = (a2 * w.window().volume::<T>(j.level)).sqrt().to_f64_lossy();
    Ok(Some(ExtremalCheck {
        cube: j,
        h1,
        bound,
        ok: h1 <= bound * (1.0 + 1e-9),
    }))
}

/// Pairing ratio and testing elements for one instance at `p = 2`.
#[derive(Clone, Debug, Serialize)]
pub struct DualityRecord {
    pub seed: u64,
    pub pairing: f64,
    pub a2_w: f64,
    /// `(condition (b))^{1/2}` for `B` with exact `p = 2` reducing operators.
    pub bmo: f64,
    pub h1: f64,
    /// `|⟨Φ, B⟩| / (A_2(W)^{1/2} ‖B‖ ‖Φ‖_{H¹})`, 0 when `Φ` or `B` vanishes.
    pub ratio: f64,
    /// The testing element aligned with `B` on the cube where condition (b)
    /// peaks, or `None` if `B` has no coefficients there.
    pub extremal: Option<ExtremalCheck>,
    /// `|⟨S^*, B⟩| / |J|^{1/2}` for the aligned element; at least
    /// `(condition (b) on J)^{1/2}`.
    pub extremal_pairing: f64,
    pub extremal_pairing_ok: bool,
    /// Random unit sequences on random cubes.
    pub random: Vec<ExtremalCheck>,
}

impl DualityRecord {
    pub fn checks_ok(&self) -> bool {
        self.extremal.as_ref().is_none_or(|c| c.ok)
            && self.extremal_pairing_ok
            && self.random.iter().all(|c| c.ok)
    }
}

pub fn duality_record<T: Real>(inst: &Instance<T>, random_checks: usize) -> Result<DualityRecord> {
    let (w, u, b, phi) = (&inst.w, &inst.u, &inst.b, &inst.phi);
    let win = w.window().clone();
    let dim = win.dim();
    let pair = WeightPair::new(w, u, T::lit(2.0))?;
    let bs = HaarSpectrum::analyze(b);
    let cb = condition_b(&pair, &bs)?;
    let (a2, _) = a2_averaged(w)?;
    let pairing = frobenius_pairing(phi, b)?.to_f64_lossy();
    let h1 = h1_norm(phi, w, u)?.to_f64_lossy();
    let bmo = cb.supremum.sqrt();
    let denom = a2.to_f64_lossy().sqrt() * bmo * h1;
    let ratio = if pairing == 0.0 || denom == 0.0 {
        0.0
    } else {
        pairing.abs() / denom
    };

    // Aligned element: S_I = (m_I U)^{-1/2} B_I^* (m_I W)^{1/2}.
    let j = cb.witness;
    let (wa, ua) = (w.averages(), u.averages());
    let mut aligned = HaarSpectrum::zeros(win.clone(), w.rows(), w.rows());
    if j.level < win.depth() {
        for i in interior_descendants(&win, j) {
            let l = linalg::spd_power(ua.get(i), T::lit(-0.5))?;
            let r = linalg::spd_sqrt(wa.get(i))?;
            for e in Signature::cancellative(dim) {
                *aligned.get_mut(i, e) = &l * bs.get(i, e).transpose() * &r;
            }
        }
    }
    let extremal = if j.level < win.depth() {
        extremal_check(w, u, j, &aligned, a2)?
    } else {
        None
    };
    let (extremal_pairing, extremal_pairing_ok) = match extremal_element(w, u, j, &aligned)? {
        Some(s) if j.level < win.depth() => {
            let v = frobenius_pairing(&s, b)?.abs().to_f64_lossy()
                / win.volume::<T>(j.level).sqrt().to_f64_lossy();
            let cj = cb.at(&win, j).sqrt();
            (v, v >= cj * (1.0 - 1e-9))
        }
        _ => (0.0, true),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed ^ 0xd0a1_17e5);
    let n = w.rows();
    let mut random = Vec::with_capacity(random_checks);
    for _ in 0..random_checks {
        let level = rng.random_range(0..win.depth());
        let index = rng.random_range(0..win.cubes_at_level(level));
        let cube = CubeId { level, index };
        let s = HaarSpectrum::from_fn(win.clone(), n, n, |_, _| {
            DMatrix::from_fn(n, n, |_, _| T::lit(rng.random_range(-1.0..1.0)))
        });
        if let Some(c) = extremal_check(w, u, cube, &s, a2)? {
            random.push(c);
        }
    }
    Ok(DualityRecord {
        seed: inst.seed,
        pairing,
        a2_w: a2.to_f64_lossy(),
        bmo,
        h1,
        ratio,
        extremal,
        extremal_pairing,
        extremal_pairing_ok,
        random,
    })
}

/// Duality records over an ensemble.
#[derive(Clone, Debug, Serialize)]
pub struct DualityExperiment {
    pub records: Vec<DualityRecord>,
    /// Largest pairing ratio seen.
    pub ceiling: f64,
    /// Every testing element met its H¹ bound.
    pub checks_ok: bool,
}

pub fn duality_experiment<T: Real>(
    instances: &[Instance<T>],
    random_checks: usize,
) -> Result<DualityExperiment> {
    let records = instances
        .par_iter()
        .map(|inst| duality_record(inst, random_checks))
        .collect::<Result<Vec<_>>>()?;
    let ceiling = records.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let checks_ok = records.iter().all(|r| r.checks_ok());
    Ok(DualityExperiment {
        records,
        ceiling,
        checks_ok,
    })
}
