use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use matweight::bmo::EnsembleSpec;
use matweight::opnorm::DENSE_CAP;
use matweight::Grid;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MANIFEST: &str = include_str!("../manifests/default.json");

/// How the symbol `B` or the test function `Φ` of each instance is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    #[default]
    Random,
    Zero,
    Constant,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Shift indices `1..=2^d`; empty means the standard grid only.
    #[serde(default)]
    pub grids: Vec<u32>,
    /// Ascent steps for lower-bound operator norms at `p != 2`.
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub symbol: Draw,
    #[serde(default)]
    pub phi: Draw,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}

fn default_epsilon() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    (0..8).collect()
}

fn default_budget() -> usize {
    40
}

/// Command-line values that take precedence over the manifest.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub depth: Option<u32>,
    pub p: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub seeds: Option<u64>,
    pub grids: Vec<u32>,
    pub out: Option<PathBuf>,
}

impl Manifest {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => DEFAULT_MANIFEST.to_string(),
        };
        let mut m: Manifest = serde_json::from_str(&text).context("malformed manifest")?;
        if let Some(d) = o.depth {
            m.ensemble.depth = d;
        }
        if !o.p.is_empty() {
            m.p = o.p.clone();
        }
        if !o.epsilon.is_empty() {
            m.epsilon = o.epsilon.clone();
        }
        if let Some(n) = o.seeds {
            m.seeds = (0..n).collect();
        }
        if !o.grids.is_empty() {
            m.grids = o.grids.clone();
        }
        if o.out.is_some() {
            m.out = o.out.clone();
        }
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let e = &self.ensemble;
        ensure!(e.n > 0 && e.d > 0, "ensemble n and d must be positive");
        let dim = e.n as u128 * (1u128 << (e.d as u32 * e.depth).min(100));
        if dim > DENSE_CAP as u128 {
            bail!("n * 2^(d * depth) = {dim} exceeds the dense operator cap {DENSE_CAP}");
        }
        for &p in &self.p {
            ensure!(
                p > 1.0 && p.is_finite(),
                "exponent p = {p} is outside (1, inf)"
            );
        }
        for &eps in &self.epsilon {
            ensure!(
                eps > 0.0 && eps.is_finite(),
                "epsilon = {eps} must be positive"
            );
        }
        ensure!(!self.seeds.is_empty(), "manifest lists no seeds");
        for &t in &self.grids {
            Grid::new(e.d, t)?;
        }
        Ok(())
    }

    pub fn grids(&self) -> Vec<Grid> {
        if self.grids.is_empty() {
            vec![Grid::standard(self.ensemble.d)]
        } else {
            self.grids
                .iter()
                .map(|&t| Grid::new(self.ensemble.d, t).expect("validated"))
                .collect()
        }
    }
}
