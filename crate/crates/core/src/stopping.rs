//! The stopping time on pairs of weights: maximal cubes where the reducing
//! operators of `W` or `U` drift by more than `λ`, their generations and the
//! measure decay of the stopped sets.

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{CubeId, Window};
use crate::error::{Error, Result};
use crate::fields::{Field, ReducingTable};
use crate::linalg;
use crate::scalar::Real;

/// Largest `λ` tried by [`default_lambda`].
pub const LAMBDA_CAP: f64 = (1u64 << 40) as f64;

/// A cube of `J(I)` with the four norms that compare it to `I`:
/// `‖V_J(W)V_I(W)^{-1}‖`, `‖V_J(W)^{-1}V_I(W)‖`, `‖V_J(U)V_I(U)^{-1}‖`,
/// `‖V_I(U)V_J(U)^{-1}‖`.
#[derive(Clone, Debug, Serialize)]
pub struct Stop {
    pub cube: CubeId,
    pub from: CubeId,
    pub norms: [f64; 4],
}

/// `J^j(root)` and `F^j(root)`.
#[derive(Clone, Debug, Serialize)]
pub struct Generation {
    pub j: usize,
    pub stopped: Vec<Stop>,
    /// Every cube of `F^j`, i.e. the blocks under the cubes of `J^{j-1}`.
    pub blocks: Vec<CubeId>,
    /// `|∪ J^j| / |root|`.
    pub stopped_fraction: f64,
}

#[derive(Clone, Debug)]
pub struct StoppingForest {
    window: Window,
    root: CubeId,
    lambda: f64,
    generations: Vec<Generation>,
}

fn ratio_norms<T: Real>(
    vw: &ReducingTable<T>,
    vu: &ReducingTable<T>,
    i: CubeId,
    j: CubeId,
) -> [f64; 4] {
    [
        linalg::op_norm(&(vw.get(j) * vw.inverse(i))),
        linalg::op_norm(&(vw.inverse(j) * vw.get(i))),
        linalg::op_norm(&(vu.get(j) * vu.inverse(i))),
        linalg::op_norm(&(vu.get(i) * vu.inverse(j))),
    ]
    .map(|x| x.to_f64_lossy())
}

fn check_tables<T: Real>(vw: &ReducingTable<T>, vu: &ReducingTable<T>) -> Result<()> {
    if vw.window() != vu.window() {
        return Err(Error::Mismatch(
            "reducing tables live on different windows".into(),
        ));
    }
    if vw.is_dual() || vu.is_dual() {
        return Err(Error::InvalidParameter(
            "stopping time uses primal reducing operators".into(),
        ));
    }
    Ok(())
}

/// `J(I)` and `F(I)` by a top-down scan of `D(I)`.
fn stop_once<T: Real>(
    vw: &ReducingTable<T>,
    vu: &ReducingTable<T>,
    lambda: f64,
    i: CubeId,
) -> (Vec<Stop>, Vec<CubeId>) {
    let win = vw.window();
    let mut stopped = Vec::new();
    let mut block = vec![i];
    let mut stack: Vec<CubeId> = if win.is_leaf(i) {
        vec![]
    } else {
        win.children(i).collect()
    };
    while let Some(j) = stack.pop() {
        let norms = ratio_norms(vw, vu, i, j);
        if norms.iter().any(|&x| x > lambda) {
            stopped.push(Stop {
                cube: j,
                from: i,
                norms,
            });
        } else {
            block.push(j);
            if !win.is_leaf(j) {
                stack.extend(win.children(j));
            }
        }
    }
    stopped.sort_by_key(|s| s.cube);
    block.sort();
    (stopped, block)
}

impl StoppingForest {
    /// Builds every generation below `root` from primal reducing tables.
    pub fn from_tables<T: Real>(
        vw: &ReducingTable<T>,
        vu: &ReducingTable<T>,
        root: CubeId,
        lambda: f64,
    ) -> Result<Self> {
        check_tables(vw, vu)?;
        if !(lambda > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must exceed 1, got {lambda}"
            )));
        }
        let win = vw.window().clone();
        let root_volume = win.volume::<f64>(root.level);
        let mut generations = Vec::new();
        let mut current = vec![root];
        let mut j = 1;
        while !current.is_empty() {
            let mut stopped = Vec::new();
            let mut blocks = Vec::new();
            for &top in &current {
                let (s, b) = stop_once(vw, vu, lambda, top);
                stopped.extend(s);
                blocks.extend(b);
            }
            let mass: f64 = stopped
                .iter()
                .map(|s| win.volume::<f64>(s.cube.level))
                .sum();
            current = stopped.iter().map(|s| s.cube).collect();
            generations.push(Generation {
                j,
                stopped,
                blocks,
                stopped_fraction: mass / root_volume,
            });
            j += 1;
        }
        Ok(StoppingForest {
            window: win,
            root,
            lambda,
            generations,
        })
    }

    pub fn root(&self) -> CubeId {
        self.root
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Generations `j = 1, 2, …`; the last one has no stopped cubes.
    pub fn generations(&self) -> &[Generation] {
        &self.generations
    }

    /// `J^j`; `J^0` is the root.
    pub fn stopped(&self, j: usize) -> Vec<CubeId> {
        if j == 0 {
            return vec![self.root];
        }
        self.generations
            .get(j - 1)
            .map(|g| g.stopped.iter().map(|s| s.cube).collect())
            .unwrap_or_default()
    }

    /// Disjointness of every `J^j` and the partition of `D(root)` by the `F^j`.
    pub fn check_structure(&self) -> StructureReport {
        let win = &self.window;
        let mut owner = vec![0usize; win.cube_count()];
        let mut partition = true;
        for g in &self.generations {
            for &c in &g.blocks {
                let slot = &mut owner[win.linear(c)];
                partition &= *slot == 0;
                *slot = g.j;
            }
        }
        let expected: usize = (self.root.level..=win.depth())
            .map(|l| 1usize << (win.dim() as u32 * (l - self.root.level)))
            .sum();
        let covered = owner.iter().filter(|&&o| o != 0).count();
        partition &= covered == expected;
        let mut disjoint = true;
        for g in &self.generations {
            let mut cubes: Vec<CubeId> = g.stopped.iter().map(|s| s.cube).collect();
            cubes.sort();
            for a in 0..cubes.len() {
                for b in a + 1..cubes.len() {
                    disjoint &=
                        !win.contains(cubes[a], cubes[b]) && !win.contains(cubes[b], cubes[a]);
                }
            }
        }
        // Each stopped cube heads the next block: J ∈ F(J).
        let self_block = self.generations.windows(2).all(|w| {
            w[0].stopped
                .iter()
                .all(|s| owner[win.linear(s.cube)] == w[1].j)
        });
        StructureReport {
            disjoint,
            partition,
            self_block,
        }
    }

    /// Every cube of `F(I)` has all four norms at most `λ` relative to `I`.
    pub fn check_blocks<T: Real>(&self, vw: &ReducingTable<T>, vu: &ReducingTable<T>) -> bool {
        let mut tops = vec![self.root];
        for g in &self.generations {
            for &c in &g.blocks {
                let top = tops
                    .iter()
                    .filter(|&&t| self.window.contains(t, c))
                    .max_by_key(|t| t.level)
                    .copied()
                    .expect("block lies under a stopped cube");
                if ratio_norms(vw, vu, top, c).iter().any(|&x| x > self.lambda) {
                    return false;
                }
            }
            tops = g.stopped.iter().map(|s| s.cube).collect();
        }
        true
    }

    /// Nested JSON: each stopped cube with its generation, norms and the
    /// cubes that stop below it.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let win = &self.window;
        let mut children: std::collections::HashMap<CubeId, Vec<&Stop>> = Default::default();
        let mut generation_of: std::collections::HashMap<CubeId, usize> = Default::default();
        for g in &self.generations {
            for s in &g.stopped {
                children.entry(s.from).or_default().push(s);
                generation_of.insert(s.cube, g.j);
            }
        }
        fn node(
            win: &Window,
            id: CubeId,
            generation: usize,
            norms: Option<[f64; 4]>,
            children: &std::collections::HashMap<CubeId, Vec<&Stop>>,
        ) -> serde_json::Value {
            let kids: Vec<_> = children
                .get(&id)
                .map(|v| {
                    v.iter()
                        .map(|s| node(win, s.cube, generation + 1, Some(s.norms), children))
                        .collect()
                })
                .unwrap_or_default();
            serde_json::json!({
                "cube": win.address(id),
                "generation": generation,
                "norms": norms,
                "stopped": kids,
            })
        }
        json!({
            "lambda": self.lambda,
            "fractions": self.generations.iter().map(|g| g.stopped_fraction).collect::<Vec<_>>(),
            "tree": node(win, self.root, 0, None, &children),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub disjoint: bool,
    pub partition: bool,
    pub self_block: bool,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.disjoint && self.partition && self.self_block
    }
}

/// Measured `|∪ J^j| / |I|` against `2^{-j}`.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub lambda: f64,
    pub fractions: Vec<f64>,
    /// `2^j |∪ J^j| / |I|`; at most 1 when decay holds.
    pub normalized: Vec<f64>,
    pub passed: bool,
}

pub fn verify_decay(forest: &StoppingForest) -> DecayReport {
    let fractions: Vec<f64> = forest
        .generations
        .iter()
        .map(|g| g.stopped_fraction)
        .collect();
    let normalized: Vec<f64> = fractions
        .iter()
        .enumerate()
        .map(|(k, f)| f * 2f64.powi(k as i32 + 1))
        .collect();
    let passed = normalized.iter().all(|&x| x <= 1.0 + 1e-12);
    DecayReport {
        lambda: forest.lambda,
        fractions,
        normalized,
        passed,
    }
}

/// Forests rooted at every cube of the window, built in parallel.
pub fn forests_everywhere<T: Real>(
    vw: &ReducingTable<T>,
    vu: &ReducingTable<T>,
    lambda: f64,
) -> Result<Vec<StoppingForest>> {
    check_tables(vw, vu)?;
    let cubes: Vec<CubeId> = vw.window().cubes().collect();
    cubes
        .par_iter()
        .map(|&root| StoppingForest::from_tables(vw, vu, root, lambda))
        .collect()
}

/// Builds the forest below `root` for the pair `(W, U)` at exponent `p`.
pub fn build<T: Real>(
    w: &Field<T>,
    u: &Field<T>,
    p: T,
    root: CubeId,
    lambda: f64,
) -> Result<StoppingForest> {
    let vw = ReducingTable::primal(w, p)?;
    let vu = ReducingTable::primal(u, p)?;
    StoppingForest::from_tables(&vw, &vu, root, lambda)
}

/// The smallest power of two `λ ≥ 2` for which the decay
/// `|∪ J^j(I)| ≤ 2^{-j}|I|` holds for every cube `I` of the window.
pub fn default_lambda_from_tables<T: Real>(
    vw: &ReducingTable<T>,
    vu: &ReducingTable<T>,
) -> Result<f64> {
    let mut lambda = 2.0;
    while lambda <= LAMBDA_CAP {
        let forests = forests_everywhere(vw, vu, lambda)?;
        if forests.iter().all(|f| verify_decay(f).passed) {
            return Ok(lambda);
        }
        lambda *= 2.0;
    }
    Err(Error::LambdaCap(LAMBDA_CAP))
}

pub fn default_lambda<T: Real>(w: &Field<T>, u: &Field<T>, p: T) -> Result<f64> {
    let vw = ReducingTable::primal(w, p)?;
    let vu = ReducingTable::primal(u, p)?;
    default_lambda_from_tables(&vw, &vu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair_never_stops() {
        let w = Field::<f64>::identity(Window::unit(1, 4).unwrap(), 2);
        let f = build(&w, &w, 2.0, w.window().root_id(), 2.0).unwrap();
        assert_eq!(f.generations().len(), 1);
        assert_eq!(f.generations()[0].blocks.len(), 31);
        assert!(f.check_structure().ok());
        assert_eq!(default_lambda(&w, &w, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn single_jump() {
        // d = 2, w = 3 on one quadrant and 1 elsewhere: that quadrant has ratio
        // sqrt(3 / 1.5) ≈ 1.414, the others sqrt(1.5) ≈ 1.225.
        let win = Window::unit(2, 2).unwrap();
        let vals: Vec<f64> = (0..16)
            .map(|l| if l / 4 == 2 { 3.0 } else { 1.0 })
            .collect();
        let w = Field::scalar(win.clone(), &vals).unwrap();
        let u = Field::<f64>::identity(win.clone(), 1);
        let f = build(&w, &u, 2.0, win.root_id(), 1.3).unwrap();
        assert_eq!(f.stopped(1), vec![win.child(win.root_id(), 2)]);
        assert!((f.generations()[0].stopped_fraction - 0.25).abs() < 1e-15);
        assert!(f.check_structure().ok());
        let f = build(&w, &u, 2.0, win.root_id(), 1.2).unwrap();
        assert_eq!(f.stopped(1).len(), 4);
    }

    #[test]
    fn rejects_small_lambda() {
        let w = Field::<f64>::identity(Window::unit(1, 2).unwrap(), 1);
        assert!(build(&w, &w, 2.0, w.window().root_id(), 1.0).is_err());
    }
}
