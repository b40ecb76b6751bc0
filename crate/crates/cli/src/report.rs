use std::io::Write;
use std::path::Path;

use anyhow::Result;
use matweight::bmo::{Band, BmoReport};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One CSV line.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub quantity: String,
    pub p: f64,
    pub epsilon: Option<f64>,
    pub grid: u32,
    pub supremum: f64,
    #[serde(rename = "witness-cube")]
    pub witness_cube: String,
    #[serde(rename = "a2W")]
    pub a2_w: Option<f64>,
    #[serde(rename = "a2U")]
    pub a2_u: Option<f64>,
    pub seed: Option<u64>,
}

impl Row {
    pub fn new(quantity: impl Into<String>, p: f64, grid: u32, supremum: f64) -> Self {
        Row {
            quantity: quantity.into(),
            p,
            epsilon: None,
            grid,
            // Drop the sign of negative zero.
            supremum: supremum + 0.0,
            witness_cube: String::new(),
            a2_w: None,
            a2_u: None,
            seed: None,
        }
    }

    pub fn from_report(r: &BmoReport) -> Self {
        Row {
            epsilon: r.epsilon,
            witness_cube: r.witness_address.clone(),
            ..Row::new(&r.quantity, r.p, r.grid.shift(), r.supremum)
        }
    }

    pub fn weights(mut self, a2_w: Option<f64>, a2_u: Option<f64>) -> Self {
        self.a2_w = a2_w;
        self.a2_u = a2_u;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn witness(mut self, w: impl Into<String>) -> Self {
        self.witness_cube = w.into();
        self
    }
}

/// A hard invariant; any failure makes the process exit nonzero.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
    /// Hard pass/fail identities.
    pub checks: Vec<Check>,
    /// Informational comparability bands.
    pub bands: Vec<Band>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write(&self, format: Format, out: Option<&Path>) -> Result<()> {
        match out {
            Some(path) => {
                let file = std::io::BufWriter::new(std::fs::File::create(path)?);
                self.write_to(format, file)
            }
            None => self.write_to(format, std::io::stdout().lock()),
        }?;
        if format == Format::Csv {
            let mut err = std::io::stderr().lock();
            let failed: Vec<_> = self.checks.iter().filter(|c| !c.passed).collect();
            for c in &failed {
                writeln!(err, "check {} FAILED: {}", c.name, c.detail)?;
            }
            if !self.checks.is_empty() {
                writeln!(
                    err,
                    "checks: {} passed, {} failed",
                    self.checks.len() - failed.len(),
                    failed.len()
                )?;
            }
            for b in &self.bands {
                writeln!(
                    err,
                    "band {}/{}: [{:.4e}, {:.4e}] spread {:.3e}",
                    b.numerator, b.denominator, b.min, b.max, b.spread
                )?;
            }
        }
        Ok(())
    }

    fn write_to<W: Write>(&self, format: Format, mut out: W) -> Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut out);
                for r in &self.rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
