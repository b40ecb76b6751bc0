use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    bloom_bprime, bloom_cprime, bmo_original, condition_b, condition_c, hlw_condition, WeightPair,
};
use crate::dyadic::Window;
use crate::error::Result;
use crate::fields::{
    ap_characteristic_in_window, conjugate, generate_weight, Field, WeightKind, WeightSpec,
};
use crate::opnorm::{lp_opnorm_estimate, materialize, weighted_opnorm_p2, Operator};
use crate::scalar::Real;
use crate::transforms::HaarSpectrum;

/// Shape of a random ensemble of `(W, U, B, Φ)` instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub d: usize,
    pub depth: u32,
    /// Initial log-amplitude of the weights.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// Weights are damped until their window `A_2` characteristic is at most this.
    #[serde(default = "default_cap")]
    pub a2_cap: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_decay() -> f64 {
    0.7
}

fn default_cap() -> f64 {
    10.0
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec {
            n: 2,
            d: 1,
            depth: 8,
            amplitude: default_amplitude(),
            decay: default_decay(),
            a2_cap: default_cap(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Instance<T: Real> {
    pub seed: u64,
    pub w: Field<T>,
    pub u: Field<T>,
    pub b: Field<T>,
    pub phi: Field<T>,
}

fn capped_weight<T: Real>(spec: &EnsembleSpec, seed: u64) -> Result<Field<T>> {
    let mut amplitude = spec.amplitude;
    loop {
        let ws = WeightSpec {
            n: spec.n,
            d: spec.d,
            depth: spec.depth,
            shift: None,
            kind: WeightKind::RandomLogSpd {
                seed,
                amplitude,
                decay: spec.decay,
            },
        };
        let w = generate_weight::<T>(&ws)?;
        let a2 = ap_characteristic_in_window(&w, T::lit(2.0), None)?
            .value
            .to_f64_lossy();
        if a2 <= spec.a2_cap || amplitude < 1e-3 {
            return Ok(w);
        }
        amplitude *= 0.7;
    }
}

/// Random `n × n` symbol whose Haar coefficients on `I` are uniform in
/// `[-1, 1]` times `|I|^{1/2}`, so every scale contributes comparably.
pub fn random_symbol<T: Real>(win: &Window, n: usize, seed: u64) -> Field<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = HaarSpectrum::from_fn(win.clone(), n, n, |id, _| {
        let scale = win.volume::<f64>(id.level).sqrt();
        DMatrix::from_fn(n, n, |_, _| T::lit(scale * rng.random_range(-1.0..1.0)))
    });
    s.set_root(DMatrix::from_fn(n, n, |_, _| {
        T::lit(rng.random_range(-1.0..1.0))
    }));
    s.synthesize()
}

/// The weights are damped deterministically until both have window `A_2`
/// characteristic at most `spec.a2_cap`.
pub fn random_instance<T: Real>(spec: &EnsembleSpec, seed: u64) -> Result<Instance<T>> {
    let base = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let w = capped_weight(spec, base ^ 1)?;
    let u = capped_weight(spec, base ^ 2)?;
    let win = w.window().clone();
    Ok(Instance {
        seed,
        b: random_symbol(&win, spec.n, base ^ 3),
        phi: random_symbol(&win, spec.n, base ^ 4),
        w,
        u,
    })
}

/// Every quantity of the equivalence theorems on one instance, each raised to
/// the power that makes it homogeneous of degree one in `B`.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceRecord {
    pub seed: u64,
    pub p: f64,
    pub carleson: f64,
    pub condition_b: f64,
    /// Only defined at `p = 2`.
    pub hlw: Option<f64>,
    pub bloom_bprime: f64,
    pub bloom_cprime: f64,
    /// With `ε = 1`.
    pub bmo_original: f64,
    /// `‖π_B‖_{L^p(U) → L^p(W)}`: exact at `p = 2`, a lower bound otherwise.
    pub operator: f64,
    pub operator_exact: bool,
}

impl EquivalenceRecord {
    pub const COLUMNS: [&'static str; 7] = [
        "carleson",
        "condition_b",
        "hlw",
        "bloom_bprime",
        "bloom_cprime",
        "bmo_original",
        "operator",
    ];

    /// Values in [`Self::COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            Some(self.carleson),
            Some(self.condition_b),
            self.hlw,
            Some(self.bloom_bprime),
            Some(self.bloom_cprime),
            Some(self.bmo_original),
            Some(self.operator),
        ]
    }
}

/// `budget` bounds the ascent steps of the operator estimate at `p ≠ 2`.
pub fn equivalence_record<T: Real>(
    inst: &Instance<T>,
    p: T,
    budget: usize,
) -> Result<EquivalenceRecord> {
    Ok(equivalence_records(inst, &[p], budget)?.remove(0))
}

/// One record per exponent, sharing a single materialization of `π_B`.
pub fn equivalence_records<T: Real>(
    inst: &Instance<T>,
    ps: &[T],
    budget: usize,
) -> Result<Vec<EquivalenceRecord>> {
    let bs = HaarSpectrum::analyze(&inst.b);
    let t = materialize(&Operator::Paraproduct(&inst.b), inst.w.rows())?;
    let mut out = Vec::with_capacity(ps.len());
    for &p in ps {
        let pair = WeightPair::new(&inst.w, &inst.u, p)?;
        let pf = p.to_f64_lossy();
        let two = p == T::lit(2.0);
        let hlw = if two {
            Some(hlw_condition(&inst.b, &inst.w, &inst.u)?.supremum.sqrt())
        } else {
            None
        };
        let operator = if two {
            weighted_opnorm_p2(&t, &inst.w, &inst.u)?.to_f64_lossy()
        } else {
            lp_opnorm_estimate(&t, &inst.w, &inst.u, p, budget)?.lower
        };
        out.push(EquivalenceRecord {
            seed: inst.seed,
            p: pf,
            carleson: condition_c(&pair, &bs)?.sum.supremum.sqrt(),
            condition_b: condition_b(&pair, &bs)?.supremum.sqrt(),
            hlw,
            bloom_bprime: bloom_bprime(&inst.b, &pair)?.supremum.powf(1.0 / pf),
            bloom_cprime: bloom_cprime(&inst.b, &pair)?
                .supremum
                .powf(1.0 / conjugate(p).to_f64_lossy()),
            bmo_original: bmo_original(&inst.b, &inst.w, &inst.u, p, T::one())?
                .supremum
                .sqrt(),
            operator,
            operator_exact: two,
        });
    }
    Ok(out)
}

/// Spread of one pairwise ratio across an ensemble.
#[derive(Clone, Debug, Serialize)]
pub struct Band {
    pub numerator: String,
    pub denominator: String,
    pub min: f64,
    pub max: f64,
    /// `max / min`; infinite if some ratio is zero or undefined.
    pub spread: f64,
}

/// Pairwise ratio bands over records sharing one `p`. Records where both
/// quantities vanish are skipped.
pub fn ratio_bands(records: &[EquivalenceRecord]) -> Vec<Band> {
    let cols = EquivalenceRecord::COLUMNS;
    let mut out = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let ratios: Vec<f64> = records
                .iter()
                .filter_map(|r| {
                    let v = r.values();
                    Some((v[i]?, v[j]?))
                })
                .filter(|&(a, b)| a != 0.0 || b != 0.0)
                .map(|(a, b)| a / b)
                .collect();
            if ratios.is_empty() {
                continue;
            }
            let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let max = ratios.iter().copied().fold(0.0, f64::max);
            let spread = if min > 0.0 && max.is_finite() {
                max / min
            } else {
                f64::INFINITY
            };
            out.push(Band {
                numerator: cols[i].into(),
                denominator: cols[j].into(),
                min,
                max,
                spread,
            });
        }
    }
    out
}
