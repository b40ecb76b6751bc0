use matweight::bmo::{self, carleson_norm, condition_b, EnsembleSpec, WeightPair};
use matweight::fields::{ap_characteristic_in_window, generate_weight, WeightKind};
use matweight::opnorm::{lp_opnorm_estimate, materialize, weighted_opnorm_p2};
use matweight::transforms::{paraproduct, shift_commutator, shift_commutator_terms};
use matweight::{Field, HaarSpectrum, Operator, ShiftMap, WeightSpec, Window};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(win: &Window, rows: usize, cols: usize, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(win.clone(), |_| {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

fn weight(n: usize, depth: u32, seed: u64, amplitude: f64) -> Field<f64> {
    generate_weight(&WeightSpec {
        n,
        d: 1,
        depth,
        shift: None,
        kind: WeightKind::RandomLogSpd {
            seed,
            amplitude,
            decay: 0.7,
        },
    })
    .unwrap()
}

fn dist(a: &Field<f64>, b: &Field<f64>) -> f64 {
    a.sub(b).unwrap().norm_sq().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn haar_round_trip(seed in any::<u64>(), d in 1usize..=2, depth in 1u32..=4, n in 1usize..=3) {
        let win = Window::unit(d, depth).unwrap();
        let f = random_field(&win, n, 2, seed);
        let s = HaarSpectrum::analyze(&f);
        prop_assert!(dist(&s.synthesize(), &f) < 1e-12);
        prop_assert!((s.norm_sq() - f.norm_sq()).abs() < 1e-12 * f.norm_sq().max(1.0));
    }

    #[test]
    fn paraproduct_is_bilinear(seed in any::<u64>(), depth in 1u32..=6, c in -3.0f64..3.0) {
        let win = Window::unit(1, depth).unwrap();
        let b = random_field(&win, 2, 2, seed);
        let f = random_field(&win, 2, 1, seed ^ 1);
        let g = random_field(&win, 2, 1, seed ^ 2);
        let lhs = paraproduct(&b, &f.scale(c).add(&g).unwrap()).unwrap();
        let rhs = paraproduct(&b, &f).unwrap().scale(c).add(&paraproduct(&b, &g).unwrap()).unwrap();
        prop_assert!(dist(&lhs, &rhs) < 1e-11);
        let constant = Field::constant(win.clone(), DMatrix::from_element(2, 2, c));
        prop_assert!(paraproduct(&constant, &f).unwrap().norm_sq() < 1e-24);
    }

    #[test]
    fn commutator_terms_add_up(seed in any::<u64>(), depth in 3u32..=6) {
        let win = Window::unit(1, depth).unwrap();
        let b = random_field(&win, 2, 2, seed).coarsen(depth - 1);
        let f = random_field(&win, 2, 1, seed ^ 7).coarsen(depth - 1);
        let sigma = ShiftMap::random(win.clone(), seed, seed % 2 == 0).unwrap();
        let whole = shift_commutator(&b, &sigma, &f).unwrap();
        let mut acc = Field::zeros(win, 2, 1);
        for (_, t) in shift_commutator_terms(&b, &sigma, &f).unwrap() {
            acc = acc.add(&t).unwrap();
        }
        prop_assert!(dist(&acc, &whole) < 1e-11 * whole.norm_sq().sqrt().max(1.0));
    }

    #[test]
    fn weight_powers(seed in any::<u64>(), n in 1usize..=3, amplitude in 0.1f64..2.0) {
        let w = weight(n, 4, seed, amplitude);
        let inv = w.inverse().unwrap();
        let root = w.pointwise_power(0.5).unwrap();
        for x in 0..w.leaves().len() {
            let id = DMatrix::<f64>::identity(n, n);
            prop_assert!((w.leaf(x) * inv.leaf(x) - &id).norm() < 1e-9);
            let sq = root.leaf(x) * root.leaf(x);
            prop_assert!((sq - w.leaf(x)).norm() < 1e-9 * w.leaf(x).norm());
        }
    }

    #[test]
    fn a2_is_symmetric_and_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let w = weight(2, 5, seed, 1.0);
        let a = ap_characteristic_in_window(&w, 2.0, None).unwrap().value;
        let a_inv = ap_characteristic_in_window(&w.inverse().unwrap(), 2.0, None).unwrap().value;
        let a_scaled = ap_characteristic_in_window(&w.scale(c), 2.0, None).unwrap().value;
        prop_assert!(a >= 1.0 - 1e-9);
        prop_assert!((a - a_inv).abs() < 1e-8 * a);
        prop_assert!((a - a_scaled).abs() < 1e-8 * a);
    }

    #[test]
    fn carleson_forms_compare(seed in any::<u64>(), p in 1.2f64..4.0) {
        let spec = EnsembleSpec { depth: 4, ..EnsembleSpec::default() };
        let inst = bmo::random_instance::<f64>(&spec, seed).unwrap();
        let pair = WeightPair::new(&inst.w, &inst.u, p).unwrap();
        let r = carleson_norm(&pair, &HaarSpectrum::analyze(&inst.b)).unwrap();
        prop_assert!(r.consistent);
        prop_assert!(r.psd.supremum <= r.sum.supremum * (1.0 + 1e-9));
        prop_assert!(r.sum.supremum <= 2.0 * r.psd.supremum * (1.0 + 1e-9));
    }

    #[test]
    fn condition_b_is_quadratic(seed in any::<u64>(), c in -5.0f64..5.0, p in 1.2f64..4.0) {
        let spec = EnsembleSpec { depth: 4, ..EnsembleSpec::default() };
        let inst = bmo::random_instance::<f64>(&spec, seed).unwrap();
        let pair = WeightPair::new(&inst.w, &inst.u, p).unwrap();
        let base = condition_b(&pair, &HaarSpectrum::analyze(&inst.b)).unwrap().supremum;
        let scaled = condition_b(&pair, &HaarSpectrum::analyze(&inst.b.scale(c))).unwrap().supremum;
        prop_assert!((scaled - c * c * base).abs() < 1e-9 * base.max(1e-12) * c.abs().max(1.0).powi(2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lp_estimate_at_two_is_below_exact(seed in any::<u64>()) {
        let spec = EnsembleSpec { depth: 4, ..EnsembleSpec::default() };
        let inst = bmo::random_instance::<f64>(&spec, seed).unwrap();
        let t = materialize(&Operator::Paraproduct(&inst.b), 2).unwrap();
        let exact = weighted_opnorm_p2(&t, &inst.w, &inst.u).unwrap();
        let est = lp_opnorm_estimate(&t, &inst.w, &inst.u, 2.0, 20).unwrap();
        prop_assert!(est.lower <= exact * (1.0 + 1e-9));
        prop_assert!(est.lower >= est.test_lower * (1.0 - 1e-12));
        prop_assert!(est.lower > 0.0);
    }
}
