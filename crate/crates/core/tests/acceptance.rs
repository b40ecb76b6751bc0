//! The acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with `cargo test --test acceptance`; exits nonzero if any criterion
//! fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{close, Scalar};
use matweight::bmo::{
    self, random_instance, random_symbol, ratio_bands, EnsembleSpec, Instance, WeightPair,
};
use matweight::dyadic::{containing_shifted_cube, coord_from_f64};
use matweight::fields::{ap_characteristic_in_window, generate_weight, WeightKind, WeightSpec};
use matweight::opnorm::{haar_multiplier_norm_relation, materialize, weighted_opnorm_p2, Operator};
use matweight::stopping;
use matweight::transforms::{shift_commutator, shift_commutator_terms};
use matweight::{Field, HaarSpectrum, ReducingTable, ShiftMap, Signature, Window};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec(n: usize, depth: u32) -> EnsembleSpec {
    EnsembleSpec {
        n,
        d: 1,
        depth,
        ..EnsembleSpec::default()
    }
}

fn instances(n: usize, depth: u32, seeds: std::ops::Range<u64>) -> Vec<Instance<f64>> {
    let s = spec(n, depth);
    seeds
        .into_par_iter()
        .map(|k| random_instance(&s, k).unwrap())
        .collect()
}

fn scalar(f: &Field<f64>) -> Scalar {
    Scalar::new(
        f.window().depth(),
        f.leaves().iter().map(|m| m[(0, 0)]).collect(),
    )
}

fn random_field(win: &Window, rows: usize, cols: usize, seed: u64) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(win.clone(), |_| {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    })
    .unwrap()
}

fn haar_algebra() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (dim, depth) in [(1, 6), (2, 3)] {
        let win = Window::unit(dim, depth).unwrap();
        let n = win.leaf_count();
        let vol = win.leaf_volume::<f64>();
        // Orthonormality and completeness: the Haar functions plus the
        // normalized constant form an orthonormal basis of leaf functions.
        let mut basis = vec![vec![1.0 / win.volume::<f64>(0).sqrt(); n]];
        for id in win.interior_cubes() {
            for e in Signature::cancellative(dim) {
                basis.push(
                    (0..n)
                        .map(|x| {
                            if win.contains(id, win.leaf_id(x)) {
                                win.haar_on_leaf(id, e, x)
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                );
            }
        }
        ensure(basis.len() == n, || {
            format!("{} basis functions for {n} leaves", basis.len())
        })?;
        let gram = DMatrix::from_fn(n, n, |a, b| {
            (0..n).map(|x| basis[a][x] * basis[b][x] * vol).sum::<f64>()
        });
        worst = worst.max((gram - DMatrix::identity(n, n)).amax());
        // Round trip.
        let f = random_field(&win, 2, 3, dim as u64);
        let back = HaarSpectrum::analyze(&f).synthesize();
        worst = worst.max(
            f.sub(&back)
                .unwrap()
                .leaves()
                .iter()
                .map(|m| m.amax())
                .fold(0.0, f64::max),
        );
        // Parseval.
        let s = HaarSpectrum::analyze(&f);
        worst = worst.max((s.norm_sq() - f.norm_sq()).abs());
        // h^ε h^δ = |I|^{-1/2} h^{ψ(ε, δ)} for ε ≠ δ.
        for id in win.interior_cubes() {
            let scale = win.volume::<f64>(id.level).sqrt();
            for e in Signature::cancellative(dim) {
                for g in Signature::cancellative(dim).filter(|&g| g != e) {
                    let psi = e.product(g, dim);
                    for x in win.leaf_range(id) {
                        let lhs =
                            win.haar_on_leaf::<f64>(id, e, x) * win.haar_on_leaf::<f64>(id, g, x);
                        worst =
                            worst.max((lhs - win.haar_on_leaf::<f64>(id, psi, x) / scale).abs());
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-11, || format!("max error {worst:.3e}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max error {worst:.2e} in {secs:.2} s"))
}

fn commutator() -> Outcome {
    let start = Instant::now();
    let win = Window::unit(1, 8).unwrap();
    let worst = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let b = random_field(&win, 2, 2, 3 * k).coarsen(7);
            let f = random_field(&win, 2, 1, 3 * k + 1).coarsen(7);
            let sigma = ShiftMap::random(win.clone(), 3 * k + 2, k % 2 == 0).unwrap();
            let whole = shift_commutator(&b, &sigma, &f).unwrap();
            let mut sum = Field::zeros(win.clone(), 2, 1);
            for (_, t) in shift_commutator_terms(&b, &sigma, &f).unwrap() {
                sum = sum.add(&t).unwrap();
            }
            whole
                .sub(&sum)
                .unwrap()
                .leaves()
                .iter()
                .map(|m| m.amax())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-9, || format!("max error {worst:.3e}"))?;
    ensure(secs < 30.0, || format!("took {secs:.2} s"))?;
    Ok(format!("100 cases, max error {worst:.2e} in {secs:.2} s"))
}

fn scalar_oracles() -> Outcome {
    let ps = [1.5, 2.0, 3.0, 2.5, 4.0];
    let insts = instances(1, 6, 0..50);
    let results: Vec<Result<f64, String>> = insts
        .par_iter()
        .enumerate()
        .map(|(k, inst)| {
            let p = ps[k % ps.len()];
            let (b, w, u, phi) = (
                scalar(&inst.b),
                scalar(&inst.w),
                scalar(&inst.u),
                scalar(&inst.phi),
            );
            let pair = WeightPair::new(&inst.w, &inst.u, p).unwrap();
            let bs = HaarSpectrum::analyze(&inst.b);
            let sum = bmo::buckley_fkp_summation(&inst.w).unwrap();
            let (fkp, buckley) = common::fkp_buckley(&w);
            let t = materialize(&Operator::Paraproduct(&inst.b), 1).unwrap();
            let pairs = [
                (
                    "ap",
                    ap_characteristic_in_window(&inst.w, p, None).unwrap().value,
                    common::ap(&w, p),
                ),
                (
                    "carleson",
                    bmo::condition_c(&pair, &bs).unwrap().sum.supremum,
                    common::carleson(&b, &w, &u, p),
                ),
                (
                    "condition_b",
                    bmo::condition_b(&pair, &bs).unwrap().supremum,
                    common::condition_b(&b, &w, &u, p),
                ),
                (
                    "hlw",
                    bmo::hlw_condition(&inst.b, &inst.w, &inst.u)
                        .unwrap()
                        .supremum,
                    common::hlw(&b, &w, &u),
                ),
                (
                    "bloom_bprime",
                    bmo::bloom_bprime(&inst.b, &pair).unwrap().supremum,
                    common::bloom_bprime(&b, &w, &u, p),
                ),
                (
                    "bloom_cprime",
                    bmo::bloom_cprime(&inst.b, &pair).unwrap().supremum,
                    common::bloom_cprime(&b, &w, &u, p),
                ),
                ("fkp", sum.fkp.supremum, fkp),
                ("buckley", sum.buckley.supremum, buckley),
                (
                    "h1",
                    bmo::h1_norm(&inst.phi, &inst.w, &inst.u).unwrap(),
                    common::h1(&phi, &w, &u),
                ),
                (
                    "paraproduct_p2",
                    weighted_opnorm_p2(&t, &inst.w, &inst.u).unwrap(),
                    common::paraproduct_norm(&b, &w, &u),
                ),
            ];
            let mut worst = 0.0f64;
            for (name, lib, oracle) in pairs {
                let rel = (lib - oracle).abs() / lib.abs().max(oracle.abs()).max(1.0);
                if rel > 1e-9 {
                    return Err(format!("seed {k} {name}: {lib} vs {oracle}"));
                }
                worst = worst.max(rel);
            }
            Ok(worst)
        })
        .collect();
    let mut worst = 0.0f64;
    for r in results {
        worst = worst.max(r?);
    }
    Ok(format!(
        "10 quantities x 50 instances, max relative error {worst:.2e}"
    ))
}

fn exact_p2_norms() -> Outcome {
    let insts = instances(2, 8, 0..100);
    let rows: Vec<Result<(f64, f64, f64, f64), String>> = insts
        .par_iter()
        .map(|inst| {
            let win = inst.w.window().clone();
            let a2w = ap_characteristic_in_window(&inst.w, 2.0, None)
                .unwrap()
                .value;
            let a2u = ap_characteristic_in_window(&inst.u, 2.0, None)
                .unwrap()
                .value;
            ensure(a2w <= 10.0 && a2u <= 10.0, || {
                format!("seed {}: A2 {a2w:.2} {a2u:.2}", inst.seed)
            })?;
            let a = HaarSpectrum::analyze(&inst.b);
            let vw = ReducingTable::primal(&inst.w, 2.0).unwrap();
            let op = Operator::ConjugatedParaproduct {
                a: &a,
                vw: &vw,
                u: &inst.u,
            };
            let t = materialize(&op, 2).unwrap();
            let f = random_field(&win, 2, 1, inst.seed + 1000);
            let consistency = t.consistency(&op, &f).unwrap();
            let pi = materialize(&Operator::Paraproduct(&inst.b), 2).unwrap();
            let lhs = weighted_opnorm_p2(&pi, &inst.w, &inst.u).unwrap();
            let rhs = weighted_opnorm_p2(
                &pi.adjoint(),
                &inst.u.inverse().unwrap(),
                &inst.w.inverse().unwrap(),
            )
            .unwrap();
            let adjoint = (lhs - rhs).abs() / lhs.max(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(inst.seed + 2000);
            let m = HaarSpectrum::from_fn(win, 2, 2, |_, _| {
                DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0))
            });
            let rel = haar_multiplier_norm_relation(&m, &inst.w, &inst.u, 2.0, 0).unwrap();
            Ok((consistency, adjoint, rel.ratio, rel.sup_criterion))
        })
        .collect();
    let (mut cons, mut adj, mut lo, mut hi) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for r in rows {
        let (c, a, ratio, sup) = r?;
        ensure(sup > 0.0 && ratio > 0.0, || "degenerate multiplier".into())?;
        cons = cons.max(c);
        adj = adj.max(a);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    ensure(cons <= 1e-10, || format!("consistency {cons:.3e}"))?;
    ensure(adj <= 1e-9, || format!("adjoint gap {adj:.3e}"))?;
    ensure(hi / lo <= 1e3, || {
        format!("multiplier band {lo:.3e}..{hi:.3e}")
    })?;
    Ok(format!(
        "consistency {cons:.1e}, adjoint gap {adj:.1e}, norm/sup in [{lo:.3}, {hi:.3}]"
    ))
}

fn stopping_decay() -> Outcome {
    let mut pairs: Vec<(Field<f64>, Field<f64>, f64)> = instances(2, 8, 0..50)
        .into_iter()
        .enumerate()
        .map(|(k, i)| (i.w, i.u, [2.0, 3.0, 1.5][k % 3]))
        .collect();
    let power = |alphas: Vec<f64>| {
        generate_weight::<f64>(&WeightSpec {
            n: 2,
            d: 1,
            depth: 8,
            shift: None,
            kind: WeightKind::Power { alphas, x0: None },
        })
        .unwrap()
    };
    for (a, b) in [
        ([0.5, -0.3], [0.2, 0.4]),
        ([0.8, -0.6], [-0.5, 0.5]),
        ([-0.9, 0.9], [0.0, 0.0]),
    ] {
        for p in [2.0, 3.0] {
            pairs.push((power(a.to_vec()), power(b.to_vec()), p));
        }
    }
    let results: Vec<Result<f64, String>> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (w, u, p))| {
            let lambda = stopping::default_lambda(w, u, *p).map_err(|e| e.to_string())?;
            let f = stopping::build(w, u, *p, w.window().root_id(), lambda).unwrap();
            let decay = stopping::verify_decay(&f);
            let s = f.check_structure();
            ensure(decay.passed, || {
                format!("pair {k}: decay {:?}", decay.normalized)
            })?;
            ensure(s.ok(), || format!("pair {k}: structure {s:?}"))?;
            Ok(lambda)
        })
        .collect();
    let mut top = 0.0f64;
    for r in results {
        top = top.max(r?);
    }
    Ok(format!(
        "{} pairs, largest default lambda {top}",
        pairs.len()
    ))
}

fn equivalence_bands() -> Outcome {
    let insts = instances(2, 8, 0..100);
    let ps = [2.0, 3.0, 1.5];
    let all: Vec<_> = insts
        .par_iter()
        .map(|i| bmo::equivalence_records(i, &ps, 30).unwrap())
        .collect();
    let mut lines = Vec::new();
    for (k, p) in ps.into_iter().enumerate() {
        let records: Vec<_> = all.iter().map(|r| r[k].clone()).collect();
        let bands = ratio_bands(&records);
        let worst = bands
            .iter()
            .max_by(|a, b| a.spread.total_cmp(&b.spread))
            .unwrap();
        ensure(worst.spread.is_finite() && worst.spread <= 1e3, || {
            format!(
                "p={p}: {}/{} spread {:.3e}",
                worst.numerator, worst.denominator, worst.spread
            )
        })?;
        lines.push(format!(
            "p={p} worst spread {:.3} ({}/{})",
            worst.spread, worst.numerator, worst.denominator
        ));
        // Degenerate symbols: constant and zero.
        for inst in insts.iter().take(5) {
            for c in [0.0, 2.5] {
                let mut z = inst.clone();
                z.b = Field::constant(
                    z.w.window().clone(),
                    DMatrix::from_fn(2, 2, |i, j| c * (1.0 + (i + 2 * j) as f64)),
                );
                let r = bmo::equivalence_record(&z, p, 5).unwrap();
                ensure(r.values().iter().flatten().all(|&v| v == 0.0), || {
                    format!("p={p}: degenerate {r:?}")
                })?;
            }
        }
    }
    Ok(lines.join("; "))
}

fn duality() -> Outcome {
    let insts = instances(2, 7, 0..100);
    let exp = bmo::duality_experiment(&insts, 3).unwrap();
    ensure(exp.ceiling.is_finite() && exp.ceiling <= 1e3, || {
        format!("ceiling {}", exp.ceiling)
    })?;
    let bad: Vec<_> = exp
        .records
        .iter()
        .filter(|r| !r.checks_ok())
        .map(|r| r.seed)
        .collect();
    ensure(bad.is_empty(), || {
        format!("extremal bound failed for seeds {bad:?}")
    })?;
    let tight = exp
        .records
        .iter()
        .flat_map(|r| r.extremal.iter().chain(&r.random))
        .map(|c| c.h1 / c.bound)
        .fold(0.0, f64::max);
    Ok(format!(
        "ratio ceiling {:.4}, worst h1/bound {tight:.6}",
        exp.ceiling
    ))
}

fn theorem_pipeline() -> Outcome {
    let insts = instances(2, 7, 0..30);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for (k, inst) in insts.iter().enumerate() {
        // An arbitrary invertible U.
        let u = inst.b.map(|m| m + DMatrix::identity(2, 2) * 2.5);
        let p = [1.5, 2.0, 3.0][k % 3];
        let eps = rng.random_range(0.2..1.0);
        let (_, r) =
            bmo::matrix_weight_theorem_pipeline(&inst.w, &u, p, eps).map_err(|e| e.to_string())?;
        ensure(r.identity_ok, || {
            format!("seed {k}: identity error {:.3e}", r.identity_error)
        })?;
        worst = worst.max(r.identity_error);
    }
    let mut fkp = 0.0f64;
    for inst in &insts {
        let winv = inst.w.inverse().unwrap();
        let (w, _) = bmo::matrix_weight_theorem_pipeline(&winv, &inst.w, 2.0, 1.0).unwrap();
        let gap = w
            .sub(&inst.w)
            .unwrap()
            .leaves()
            .iter()
            .map(|m| m.amax())
            .fold(0.0, f64::max);
        ensure(gap <= 1e-9, || format!("W not recovered: {gap:.3e}"))?;
        let s = bmo::buckley_fkp_summation(&w).unwrap();
        ensure(
            s.fkp.supremum.is_finite() && s.buckley.supremum.is_finite(),
            || "infinite constant".into(),
        )?;
        ensure(s.buckley_ok(), || {
            format!("Buckley ordering slack {:.3e}", s.buckley_slack)
        })?;
        fkp = fkp.max(s.fkp.supremum);
    }
    Ok(format!(
        "identity error {worst:.2e}, largest FKP constant {fkp:.3}"
    ))
}

fn john_nirenberg() -> Outcome {
    let insts = instances(2, 7, 0..100);
    let agree: Vec<Result<(), String>> = insts
        .par_iter()
        .map(|inst| {
            let pair = bmo::jn_p2_pair(&inst.b, &inst.w, 0.5).unwrap();
            ensure(pair.agree(1e-12), || {
                format!("seed {}: JN pair disagrees", inst.seed)
            })?;
            ensure(pair.left.supremum > 0.0, || "random symbol gave 0".into())?;
            let f = Field::from_fn(inst.w.window().clone(), |x| {
                inst.b.leaf(x).columns(0, 1).into_owned()
            })
            .unwrap();
            let v = bmo::vector_jn(&f, &inst.w, 3.0).unwrap();
            ensure(
                (v.weighted.supremum > 0.0) == (v.plain.supremum > 0.0),
                || "vector pair disagrees".into(),
            )?;
            let c = Field::constant(inst.w.window().clone(), DMatrix::from_element(2, 2, 0.7));
            let z = bmo::jn_p2_pair(&c, &inst.w, 0.5).unwrap();
            ensure(z.left.supremum == 0.0 && z.right.supremum == 0.0, || {
                "constant gave nonzero".into()
            })?;
            let cf = Field::constant(inst.w.window().clone(), DMatrix::from_element(2, 1, 0.7));
            let zv = bmo::vector_jn(&cf, &inst.w, 3.0).unwrap();
            ensure(
                zv.weighted.supremum == 0.0 && zv.plain.supremum == 0.0,
                || "constant vector gave nonzero".into(),
            )
        })
        .collect();
    agree.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut worst = 0.0f64;
    for inst in instances(1, 6, 0..30) {
        let (b, w) = (scalar(&inst.b), scalar(&inst.w));
        let pair = bmo::jn_p2_pair(&inst.b, &inst.w, 0.5).unwrap();
        let (l, r) = common::jn_pair(&b, &w, 0.5);
        let v = bmo::vector_jn(&inst.b, &inst.w, 2.5).unwrap();
        let (vw, vp) = common::vector_jn(&b, &w, 2.5);
        for (a, o) in [
            (pair.left.supremum, l),
            (pair.right.supremum, r),
            (v.weighted.supremum, vw),
            (v.plain.supremum, vp),
        ] {
            ensure(close(a, o, 1e-9), || {
                format!("seed {}: {a} vs oracle {o}", inst.seed)
            })?;
            worst = worst.max((a - o).abs() / a.abs().max(1.0));
        }
    }
    Ok(format!("100 instances agree, scalar error {worst:.2e}"))
}

fn shifted_grids() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=2usize);
        let k = rng.random_range(-3..12i32);
        let side = 0.5f64.powi(k);
        let lower: Vec<f64> = (0..dim)
            .map(|_| (rng.random_range(-4000..4000) as f64) * 0.5f64.powi(k + 3) / 3.0)
            .collect();
        let lc: Vec<_> = lower.iter().map(|&x| coord_from_f64(x).unwrap()).collect();
        let sc = coord_from_f64(side).unwrap();
        let (_, cube) = containing_shifted_cube(&lc, sc).map_err(|e| e.to_string())?;
        ensure(cube.contains_box(&lc, sc), || {
            "container misses the cube".into()
        })?;
        worst = worst.max(cube.side_f64() / side);
    }
    ensure(worst <= 6.0, || format!("ratio {worst}"))?;
    let results: Vec<Result<(), String>> = instances(2, 8, 0..20)
        .par_iter()
        .map(|inst| {
            let r = bmo::bmo_over_shifted_grids(&inst.b, &inst.w, &inst.u, 2.0, 1.0).unwrap();
            ensure(r.finiteness_agrees, || {
                format!("seed {}: grids disagree", inst.seed)
            })?;
            let c = Field::constant(inst.w.window().clone(), DMatrix::from_element(2, 2, 1.0));
            let z = bmo::bmo_over_shifted_grids(&c, &inst.w, &inst.u, 3.0, 1.0).unwrap();
            ensure(z.finiteness_agrees && z.max_bmo_original == 0.0, || {
                "constant symbol".into()
            })
        })
        .collect();
    results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let win = Window::unit(2, 5).unwrap();
    let b = random_symbol::<f64>(&win, 2, 5);
    let w = Field::identity(win.clone(), 2);
    let r = bmo::bmo_over_shifted_grids(&b, &w, &w, 2.0, 1.0).unwrap();
    ensure(r.grids.len() == 4 && r.finiteness_agrees, || {
        "d = 2 grids disagree".into()
    })?;
    Ok(format!(
        "containing ratio <= {worst}, 20 ensembles plus d = 2 agree across grids"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("haar algebra", haar_algebra),
        ("commutator decomposition", commutator),
        ("scalar oracles", scalar_oracles),
        ("exact p=2 operator norms", exact_p2_norms),
        ("stopping decay", stopping_decay),
        ("equivalence bands", equivalence_bands),
        ("duality", duality),
        ("theorem pipeline", theorem_pipeline),
        ("john-nirenberg pairs", john_nirenberg),
        ("shifted grids", shifted_grids),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} {name}: PASS ({detail}) [{secs:.1} s]",
                k + 1
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "criterion {:>2} {name}: FAIL ({detail}) [{secs:.1} s]",
                    k + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
