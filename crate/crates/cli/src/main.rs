//! `matweight`: batch experiments for two-matrix-weighted dyadic operators.

mod commands;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use matweight::Grid;

use manifest::{Manifest, Overrides};
use report::{Format, Report};

#[derive(Parser)]
#[command(name = "matweight", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "MATWEIGHT_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Depth override for generated fields and ensembles.
    #[arg(long)]
    depth: Option<u32>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_p)]
    p: Vec<f64>,
    /// Oscillation exponents `1 + ε`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    epsilon: Vec<f64>,
    /// Shift indices of the grids to evaluate on, comma separated.
    #[arg(long, value_delimiter = ',')]
    grids: Vec<u32>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a weight from a JSON spec and write its dump.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// A_p characteristic and witness cube.
    Ap {
        /// Weight dump or spec.
        #[arg(long)]
        w: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// BMO and Carleson quantities of a symbol for a weight pair.
    Bmo {
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        u: PathBuf,
        /// Quantities to compute; all when omitted.
        #[arg(long, value_delimiter = ',')]
        which: Vec<String>,
        #[arg(long, default_value_t = 40)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Equivalence experiment over a random ensemble.
    Verify(ManifestArgs),
    /// Pairing ratios and extremal testing elements.
    Duality(ManifestArgs),
    /// Stopping forest and decay below the root.
    Stopping {
        #[arg(long)]
        w: PathBuf,
        #[arg(long)]
        u: PathBuf,
        /// Stopping parameter; the smallest decaying power of two when omitted.
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// John-Nirenberg pairs over a random ensemble.
    Jn(ManifestArgs),
    /// Build W from (Λ, U) and test U against (Λ, W).
    Thm12 {
        #[arg(long)]
        lambda: PathBuf,
        #[arg(long)]
        u: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct ManifestArgs {
    /// Experiment manifest; the built-in default when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Use seeds `0..N` instead of the manifest's list.
    #[arg(long)]
    seeds: Option<u64>,
    #[command(flatten)]
    common: Common,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 1.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(format!("p = {p} is outside (1, inf)"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

impl Common {
    fn ps(&self, default: f64) -> Vec<f64> {
        if self.p.is_empty() {
            vec![default]
        } else {
            self.p.clone()
        }
    }

    fn epsilons(&self) -> Vec<f64> {
        if self.epsilon.is_empty() {
            vec![1.0]
        } else {
            self.epsilon.clone()
        }
    }

    fn grids(&self, dim: usize) -> Result<Vec<Grid>> {
        if self.grids.is_empty() {
            return Ok(vec![Grid::standard(dim)]);
        }
        Ok(self
            .grids
            .iter()
            .map(|&t| Grid::new(dim, t))
            .collect::<Result<_, _>>()?)
    }
}

fn manifest(a: &ManifestArgs) -> Result<Manifest> {
    let o = Overrides {
        depth: a.common.depth,
        p: a.common.p.clone(),
        epsilon: a.common.epsilon.clone(),
        seeds: a.seeds,
        grids: a.common.grids.clone(),
        out: a.common.out.clone(),
    };
    Manifest::load(a.spec.as_deref(), &o)
}

fn run(cli: Cli) -> Result<bool> {
    let (report, common, out): (Report, Common, Option<PathBuf>) = match cli.command {
        Command::Gen { spec, common } => {
            let out = common.out.clone().context("gen needs --out")?;
            let r = commands::gen(&spec, common.depth, &out)?;
            for c in &r.checks {
                eprintln!("wrote {}: {}", out.display(), c.detail);
            }
            return Ok(r.passed());
        }
        Command::Ap { w, common } => {
            let field = commands::load_field(&w, common.depth)?;
            let grids = common.grids(field.window().dim())?;
            let r = commands::ap(&w, common.depth, &common.ps(2.0), &grids)?;
            let out = common.out.clone();
            (r, common, out)
        }
        Command::Bmo {
            b,
            w,
            u,
            which,
            budget,
            common,
        } => {
            let (b, w, u) = (
                commands::load_field(&b, common.depth)?,
                commands::load_field(&w, common.depth)?,
                commands::load_field(&u, common.depth)?,
            );
            let grids = common.grids(w.window().dim())?;
            for q in &which {
                if q != "all" && !commands::BMO_QUANTITIES.contains(&q.as_str()) {
                    anyhow::bail!(
                        "unknown quantity {q}; expected one of {:?}",
                        commands::BMO_QUANTITIES
                    );
                }
            }
            let r = commands::bmo_cmd(
                &b,
                &w,
                &u,
                &common.ps(2.0),
                &common.epsilons(),
                &grids,
                &which,
                budget,
            )?;
            let out = common.out.clone();
            (r, common, out)
        }
        Command::Verify(a) => {
            let m = manifest(&a)?;
            (commands::verify(&m)?, a.common, m.out)
        }
        Command::Duality(a) => {
            let m = manifest(&a)?;
            (commands::duality(&m)?, a.common, m.out)
        }
        Command::Jn(a) => {
            let m = manifest(&a)?;
            (commands::jn(&m)?, a.common, m.out)
        }
        Command::Stopping {
            w,
            u,
            lambda,
            common,
        } => {
            let (w, u) = (
                commands::load_field(&w, common.depth)?,
                commands::load_field(&u, common.depth)?,
            );
            let mut r = Report::default();
            for p in common.ps(2.0) {
                let s = commands::stopping_cmd(&w, &u, p, lambda)?;
                r.rows.extend(s.rows);
                r.checks.extend(s.checks);
            }
            let out = common.out.clone();
            (r, common, out)
        }
        Command::Thm12 { lambda, u, common } => {
            let (l, u) = (
                commands::load_field(&lambda, common.depth)?,
                commands::load_field(&u, common.depth)?,
            );
            let r = commands::thm12(&l, &u, &common.ps(2.0), &common.epsilons())?;
            let out = common.out.clone();
            (r, common, out)
        }
    };
    report.write(common.format, out.as_deref())?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("warning: {e}");
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
