use std::path::Path;

use anyhow::{Context, Result};
use matweight::bmo::{self, random_instance, ratio_bands, EquivalenceRecord, Instance, WeightPair};
use matweight::fields::{ap_characteristic_in_window, generate_weight, read_field, write_field};
use matweight::opnorm::{lp_opnorm_estimate, materialize, weighted_opnorm_p2, Operator};
use matweight::stopping;
use matweight::{Field, Grid, HaarSpectrum, WeightSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::manifest::{Draw, Manifest};
use crate::report::{Check, Report, Row};

/// Reads a field dump, or a weight spec to generate (with `depth` overriding
/// the spec's own depth).
pub fn load_field(path: &Path, depth: Option<u32>) -> Result<Field<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(text) = std::str::from_utf8(&bytes) {
        if let Ok(mut spec) = WeightSpec::from_json(text) {
            if let Some(d) = depth {
                spec.depth = d;
            }
            return Ok(generate_weight(&spec)?);
        }
    }
    read_field(&bytes[..]).with_context(|| {
        format!(
            "{} is neither a weight spec nor a field dump",
            path.display()
        )
    })
}

fn a2(w: &Field<f64>) -> Result<f64> {
    Ok(ap_characteristic_in_window(w, 2.0, None)?.value)
}

pub fn gen(spec: &Path, depth: Option<u32>, out: &Path) -> Result<Report> {
    let text =
        std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let mut spec = WeightSpec::from_json(&text)?;
    if let Some(d) = depth {
        spec.depth = d;
    }
    let field: Field<f64> = generate_weight(&spec)?;
    let file = std::io::BufWriter::new(std::fs::File::create(out)?);
    write_field(&field, file)?;
    let mut report = Report::default();
    report.checks.push(Check::new(
        "weight",
        field.is_weight(),
        format!("{} leaves", field.leaves().len()),
    ));
    Ok(report)
}

pub fn ap(w: &Path, depth: Option<u32>, ps: &[f64], grids: &[Grid]) -> Result<Report> {
    let w = load_field(w, depth)?;
    let mut report = Report::default();
    for &grid in grids {
        let wg = w.on_grid(grid)?;
        let a2w = a2(&wg)?;
        for &p in ps {
            let r = ap_characteristic_in_window(&wg, p, None)?;
            report.rows.push(
                Row::new("ap", p, grid.shift(), r.value)
                    .witness(r.witness.address())
                    .weights(Some(a2w), None),
            );
        }
    }
    Ok(report)
}

pub const BMO_QUANTITIES: [&str; 9] = [
    "bmo_original",
    "bmo_reduced",
    "carleson",
    "condition_b",
    "condition_c",
    "hlw",
    "bloom_bprime",
    "bloom_cprime",
    "paraproduct_norm",
];

#[allow(clippy::too_many_arguments)]
pub fn bmo_cmd(
    b: &Field<f64>,
    w: &Field<f64>,
    u: &Field<f64>,
    ps: &[f64],
    epsilons: &[f64],
    grids: &[Grid],
    which: &[String],
    budget: usize,
) -> Result<Report> {
    let wants = |q: &str| which.is_empty() || which.iter().any(|x| x == q || x == "all");
    let mut report = Report::default();
    for &grid in grids {
        let (bg, wg, ug) = (b.on_grid(grid)?, w.on_grid(grid)?, u.on_grid(grid)?);
        let (a2w, a2u) = (Some(a2(&wg)?), Some(a2(&ug)?));
        let bs = HaarSpectrum::analyze(&bg);
        for &p in ps {
            let pair = WeightPair::new(&wg, &ug, p)?;
            let mut reports = Vec::new();
            for &eps in epsilons {
                if wants("bmo_original") {
                    reports.push(bmo::bmo_original(&bg, &wg, &ug, p, eps)?);
                }
                if wants("bmo_reduced") {
                    reports.push(bmo::bmo_reduced(&bg, &pair, eps)?);
                }
            }
            if wants("carleson") {
                let c = bmo::carleson_norm(&pair, &bs)?;
                report.checks.push(Check::new(
                    format!("carleson_forms p={p} grid={}", grid.shift()),
                    c.consistent,
                    "psd <= sum <= n psd",
                ));
                reports.push(c.sum);
            }
            if wants("condition_b") {
                reports.push(bmo::condition_b(&pair, &bs)?);
            }
            if wants("condition_c") {
                reports.push(bmo::condition_c(&pair, &bs)?.sum);
            }
            if wants("hlw") && p == 2.0 {
                reports.push(bmo::hlw_condition(&bg, &wg, &ug)?);
            }
            if wants("bloom_bprime") {
                reports.push(bmo::bloom_bprime(&bg, &pair)?);
            }
            if wants("bloom_cprime") {
                reports.push(bmo::bloom_cprime(&bg, &pair)?);
            }
            for r in &reports {
                report.rows.push(Row::from_report(r).weights(a2w, a2u));
            }
            if wants("paraproduct_norm") {
                let t = materialize(&Operator::Paraproduct(&bg), bg.rows())?;
                let (name, v) = if p == 2.0 {
                    ("paraproduct_norm", weighted_opnorm_p2(&t, &wg, &ug)?)
                } else {
                    (
                        "paraproduct_norm_lower",
                        lp_opnorm_estimate(&t, &wg, &ug, p, budget)?.lower,
                    )
                };
                report
                    .rows
                    .push(Row::new(name, p, grid.shift(), v).weights(a2w, a2u));
            }
        }
    }
    Ok(report)
}

fn draw(kind: Draw, random: Field<f64>) -> Field<f64> {
    let n = random.rows();
    match kind {
        Draw::Random => random,
        Draw::Zero => Field::zeros(random.window().clone(), n, n),
        Draw::Constant => Field::constant(
            random.window().clone(),
            DMatrix::from_fn(n, n, |i, j| 1.0 + (i + 2 * j) as f64),
        ),
    }
}

fn instances(m: &Manifest) -> Result<Vec<Instance<f64>>> {
    m.seeds
        .par_iter()
        .map(|&s| {
            let mut inst = random_instance::<f64>(&m.ensemble, s)?;
            inst.b = draw(m.symbol, inst.b);
            inst.phi = draw(m.phi, inst.phi);
            Ok(inst)
        })
        .collect()
}

/// Sets the seed, and the weight characteristics where a row has none yet.
fn tag(rows: Vec<Row>, seed: u64, a2w: f64, a2u: f64) -> Vec<Row> {
    rows.into_iter()
        .map(|r| {
            let (w, u) = (r.a2_w.or(Some(a2w)), r.a2_u.or(Some(a2u)));
            r.seed(seed).weights(w, u)
        })
        .collect()
}

pub fn verify(m: &Manifest) -> Result<Report> {
    let insts = instances(m)?;
    let grids = m.grids();
    struct SeedOut {
        rows: Vec<Row>,
        records: Vec<EquivalenceRecord>,
        checks: Vec<Check>,
    }
    let outs = insts
        .par_iter()
        .map(|inst| -> Result<SeedOut> {
            let (a2w, a2u) = (a2(&inst.w)?, a2(&inst.u)?);
            let mut rows = Vec::new();
            let mut checks = Vec::new();
            let mut records = Vec::new();
            for &grid in &grids {
                let sub = bmo_cmd(
                    &inst.b,
                    &inst.w,
                    &inst.u,
                    &m.p,
                    &m.epsilon,
                    &[grid],
                    &[],
                    m.budget,
                )?;
                checks.extend(sub.checks.into_iter().map(|mut c| {
                    c.name = format!("{} seed={}", c.name, inst.seed);
                    c
                }));
                if grid.is_standard() {
                    for &p in &m.p {
                        records.push(record_from_rows(&sub.rows, inst, p, m.budget)?);
                    }
                }
                rows.extend(tag(sub.rows, inst.seed, a2w, a2u));
            }
            if m.p.contains(&2.0) {
                let t = materialize(&Operator::Paraproduct(&inst.b), inst.b.rows())?;
                let lhs = weighted_opnorm_p2(&t, &inst.w, &inst.u)?;
                let rhs = weighted_opnorm_p2(&t.adjoint(), &inst.u.inverse()?, &inst.w.inverse()?)?;
                let gap = (lhs - rhs).abs() / lhs.max(1.0);
                checks.push(Check::new(
                    format!("adjoint_identity seed={}", inst.seed),
                    gap <= 1e-9,
                    format!("relative gap {gap:.3e}"),
                ));
            }
            Ok(SeedOut {
                rows,
                records,
                checks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::default();
    let mut records = Vec::new();
    for o in outs {
        report.rows.extend(o.rows);
        report.checks.extend(o.checks);
        records.extend(o.records);
    }
    for &p in &m.p {
        let at_p: Vec<_> = records.iter().filter(|r| r.p == p).cloned().collect();
        report
            .bands
            .extend(ratio_bands(&at_p).into_iter().map(|mut b| {
                b.numerator = format!("{} p={p}", b.numerator);
                b
            }));
    }
    Ok(report)
}

/// Degree-one versions of the standard-grid values, for ratio bands.
fn record_from_rows(
    rows: &[Row],
    inst: &Instance<f64>,
    p: f64,
    budget: usize,
) -> Result<EquivalenceRecord> {
    let get = |q: &str| {
        rows.iter()
            .find(|r| r.p == p && r.quantity == q)
            .map(|r| r.supremum)
    };
    let q = p / (p - 1.0);
    let bmo1 = match rows
        .iter()
        .find(|r| r.p == p && r.quantity == "bmo_original" && r.epsilon == Some(1.0))
    {
        Some(r) => r.supremum,
        None => bmo::bmo_original(&inst.b, &inst.w, &inst.u, p, 1.0)?.supremum,
    };
    let operator = match get("paraproduct_norm").or(get("paraproduct_norm_lower")) {
        Some(v) => v,
        None => bmo::equivalence_record(inst, p, budget)?.operator,
    };
    Ok(EquivalenceRecord {
        seed: inst.seed,
        p,
        carleson: get("condition_c").unwrap_or(0.0).sqrt(),
        condition_b: get("condition_b").unwrap_or(0.0).sqrt(),
        hlw: get("hlw").map(f64::sqrt),
        bloom_bprime: get("bloom_bprime").unwrap_or(0.0).powf(1.0 / p),
        bloom_cprime: get("bloom_cprime").unwrap_or(0.0).powf(1.0 / q),
        bmo_original: bmo1.sqrt(),
        operator,
        operator_exact: p == 2.0,
    })
}

pub fn duality(m: &Manifest) -> Result<Report> {
    let insts = instances(m)?;
    let exp = bmo::duality_experiment(&insts, 4)?;
    let mut report = Report::default();
    for (inst, r) in insts.iter().zip(&exp.records) {
        let (a2w, a2u) = (a2(&inst.w)?, a2(&inst.u)?);
        let win = inst.w.window();
        let witness = r
            .extremal
            .as_ref()
            .map(|c| win.address(c.cube))
            .unwrap_or_default();
        let g = win.grid().shift();
        let mut rows = vec![
            Row::new("duality_ratio", 2.0, g, r.ratio).witness(witness.clone()),
            Row::new("pairing", 2.0, g, r.pairing),
            Row::new("h1", 2.0, g, r.h1),
            Row::new("condition_b_sqrt", 2.0, g, r.bmo).witness(witness),
        ];
        if let Some(c) = &r.extremal {
            rows.push(
                Row::new("extremal_h1_over_bound", 2.0, g, c.h1 / c.bound)
                    .witness(win.address(c.cube)),
            );
        }
        let worst = r.random.iter().map(|c| c.h1 / c.bound).fold(0.0, f64::max);
        rows.push(Row::new("random_h1_over_bound", 2.0, g, worst));
        report.rows.extend(tag(rows, inst.seed, a2w, a2u));
        report.checks.push(Check::new(
            format!("extremal_h1_bound seed={}", r.seed),
            r.checks_ok(),
            format!("aligned pairing {:.6e}", r.extremal_pairing),
        ));
    }
    report
        .rows
        .push(Row::new("duality_ceiling", 2.0, 0, exp.ceiling));
    Ok(report)
}

pub fn stopping_cmd(w: &Field<f64>, u: &Field<f64>, p: f64, lambda: Option<f64>) -> Result<Report> {
    let lambda = match lambda {
        Some(l) => l,
        None => stopping::default_lambda(w, u, p)?,
    };
    let win = w.window();
    let forest = stopping::build(w, u, p, win.root_id(), lambda)?;
    let decay = stopping::verify_decay(&forest);
    let structure = forest.check_structure();
    let (a2w, a2u) = (Some(a2(w)?), Some(a2(u)?));
    let mut report = Report::default();
    let root = win.address(win.root_id());
    for (j, f) in decay.fractions.iter().enumerate() {
        let mut row = Row::new(
            format!("stopped_fraction_{}", j + 1),
            p,
            win.grid().shift(),
            *f,
        )
        .witness(root.clone())
        .weights(a2w, a2u);
        row.epsilon = None;
        report.rows.push(row);
    }
    report
        .rows
        .push(Row::new("lambda", p, win.grid().shift(), lambda).weights(a2w, a2u));
    report.checks.push(Check::new(
        "decay",
        decay.passed,
        format!("lambda {lambda}"),
    ));
    report.checks.push(Check::new(
        "forest_structure",
        structure.ok(),
        format!(
            "disjoint {} partition {} self_block {}",
            structure.disjoint, structure.partition, structure.self_block
        ),
    ));
    Ok(report)
}

pub fn jn(m: &Manifest) -> Result<Report> {
    let insts = instances(m)?;
    let outs = insts
        .par_iter()
        .map(|inst| -> Result<(Vec<Row>, Vec<Check>)> {
            let (a2w, a2u) = (a2(&inst.w)?, a2(&inst.u)?);
            let mut rows = Vec::new();
            let mut checks = Vec::new();
            let win = inst.w.window().clone();
            let constant = Field::constant(
                win.clone(),
                DMatrix::from_element(inst.b.rows(), inst.b.cols(), 1.0),
            );
            for &eps in &m.epsilon {
                let pair = bmo::jn_p2_pair(&inst.b, &inst.w, eps)?;
                let tol = 1e-12 * pair.left.supremum.max(pair.right.supremum).max(1.0);
                checks.push(Check::new(
                    format!("jn_finiteness seed={} eps={eps}", inst.seed),
                    pair.agree(tol),
                    format!(
                        "left {:.4e} right {:.4e}",
                        pair.left.supremum, pair.right.supremum
                    ),
                ));
                let zero = bmo::jn_p2_pair(&constant, &inst.w, eps)?;
                checks.push(Check::new(
                    format!("jn_constant seed={} eps={eps}", inst.seed),
                    zero.left.supremum == 0.0 && zero.right.supremum == 0.0,
                    "constant symbol",
                ));
                rows.push(Row::from_report(&pair.left));
                rows.push(Row::from_report(&pair.right));
            }
            let f = Field::from_fn(win.clone(), |x| inst.b.leaf(x).columns(0, 1).into_owned())?;
            for &p in &m.p {
                let v = bmo::vector_jn(&f, &inst.w, p)?;
                rows.push(Row::from_report(&v.weighted));
                rows.push(Row::from_report(&v.plain));
            }
            Ok((tag(rows, inst.seed, a2w, a2u), checks))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::default();
    for (rows, checks) in outs {
        report.rows.extend(rows);
        report.checks.extend(checks);
    }
    Ok(report)
}

pub fn thm12(lambda: &Field<f64>, u: &Field<f64>, ps: &[f64], epsilons: &[f64]) -> Result<Report> {
    let mut report = Report::default();
    let g = lambda.window().grid().shift();
    for &p in ps {
        for &eps in epsilons {
            let (w, r) = bmo::matrix_weight_theorem_pipeline(lambda, u, p, eps)?;
            let a2w = Some(a2(&w)?);
            report
                .rows
                .push(Row::new("identity_error", p, g, r.identity_error));
            report.rows.push(
                Row::new("ap_w", p, g, r.ap_w)
                    .witness(r.ap_witness.clone())
                    .weights(a2w, None),
            );
            report
                .rows
                .push(Row::from_report(&r.bmo).weights(a2w, None));
            report.checks.push(Check::new(
                format!("pointwise_identity p={p}"),
                r.identity_ok,
                format!("max relative error {:.3e}", r.identity_error),
            ));
            if p == 2.0 {
                let s = bmo::buckley_fkp_summation(&w)?;
                report
                    .rows
                    .push(Row::from_report(&s.buckley).weights(a2w, None));
                report
                    .rows
                    .push(Row::from_report(&s.fkp).weights(a2w, None));
                report
                    .rows
                    .push(Row::from_report(&s.summation).weights(a2w, None));
                report.checks.push(Check::new(
                    "buckley_ordering",
                    s.buckley_ok(),
                    format!("slack {:.3e}", s.buckley_slack),
                ));
            }
        }
    }
    Ok(report)
}
