use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Field;
use crate::dyadic::{coord_from_f64, coord_to_f64, Coord, DyadicCube, Grid, Signature, Window};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// A synthetic weight: shape, window and generator parameters.
///
/// ```json
/// {"kind": "power", "n": 2, "d": 1, "depth": 8, "alphas": [0.5, -0.3]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub n: usize,
    pub d: usize,
    pub depth: u32,
    /// Grid shift of the root; the root is the level-0 cube of that grid at
    /// the origin. Omitted means `[0,1)^d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<u32>,
    #[serde(flatten)]
    pub kind: WeightKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Identity,
    /// `diag(|x - x0|^{α_1}, …, |x - x0|^{α_n})`, `x0` on a leaf corner.
    Power {
        alphas: Vec<f64>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    /// `R(θ(x))ᵀ Λ(x) R(θ(x))` with a rotation in the first coordinate plane
    /// and `θ(x) = θ0 + Σ slope_i x_i` taken at leaf centers.
    Rotation {
        theta0: f64,
        #[serde(default)]
        theta_slope: Vec<f64>,
        diagonal: Diagonal,
    },
    /// `exp(L)` where `L` is a dyadic martingale of symmetric matrices whose
    /// increments at level `k` are bounded by `amplitude · decay^k`.
    RandomLogSpd {
        seed: u64,
        amplitude: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
    /// Row-major leaf matrices in Morton order.
    Explicit {
        leaves: Vec<Vec<f64>>,
    },
}

fn default_decay() -> f64 {
    0.7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagonal {
    Constant {
        values: Vec<f64>,
    },
    Power {
        alphas: Vec<f64>,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
}

impl WeightSpec {
    pub fn window(&self) -> Result<Window> {
        match self.shift {
            None => Window::unit(self.d, self.depth),
            Some(t) => {
                let grid = Grid::new(self.d, t)?;
                Window::new(DyadicCube::new(grid, 0, vec![0; self.d])?, self.depth)
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::MalformedSpec(e.to_string()))
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedSpec(msg.into())
}

/// Builds the weight described by `spec`.
pub fn generate_weight<T: Real>(spec: &WeightSpec) -> Result<Field<T>> {
    if spec.n == 0 || spec.d == 0 {
        return Err(malformed("n and d must be positive"));
    }
    let win = spec.window()?;
    let n = spec.n;
    let field = match &spec.kind {
        WeightKind::Identity => Field::identity(win, n),
        WeightKind::Power { alphas, x0 } => {
            check_len(alphas.len(), n, "alphas")?;
            let cols = power_diagonals(&win, alphas, x0.as_deref())?;
            diagonal_field(&win, &cols)?
        }
        WeightKind::Rotation {
            theta0,
            theta_slope,
            diagonal,
        } => {
            if n < 2 {
                return Err(malformed("rotation weights need n >= 2"));
            }
            if !theta_slope.is_empty() {
                check_len(theta_slope.len(), spec.d, "theta_slope")?;
            }
            let cols = match diagonal {
                Diagonal::Constant { values } => {
                    check_len(values.len(), n, "values")?;
                    if values.iter().any(|v| !(*v > 0.0)) {
                        return Err(malformed("diagonal values must be positive"));
                    }
                    values.iter().map(|v| vec![*v; win.leaf_count()]).collect()
                }
                Diagonal::Power { alphas, x0 } => {
                    check_len(alphas.len(), n, "alphas")?;
                    power_diagonals(&win, alphas, x0.as_deref())?
                }
            };
            let lambda = diagonal_field(&win, &cols)?;
            Field::from_fn(win.clone(), |leaf| {
                let c = win.leaf_center(leaf);
                let theta = theta0 + theta_slope.iter().zip(&c).map(|(s, x)| s * x).sum::<f64>();
                let mut r = DMatrix::identity(n, n);
                let (s, co) = theta.sin_cos();
                r[(0, 0)] = co;
                r[(0, 1)] = -s;
                r[(1, 0)] = s;
                r[(1, 1)] = co;
                linalg::symmetrize(&(r.transpose() * lambda.leaf(leaf) * r))
            })?
        }
        WeightKind::RandomLogSpd {
            seed,
            amplitude,
            decay,
        } => random_log_spd(&win, n, *seed, *amplitude, *decay)?,
        WeightKind::Explicit { leaves } => {
            check_len(leaves.len(), win.leaf_count(), "leaves")?;
            let mats = leaves
                .iter()
                .map(|v| {
                    check_len(v.len(), n * n, "leaf entries")?;
                    Ok(DMatrix::from_row_slice(n, n, v))
                })
                .collect::<Result<Vec<_>>>()?;
            Field::new(win, mats)?
        }
    };
    field.check_weight()?;
    Ok(field.cast())
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(malformed(format!(
            "{what}: expected {want} entries, got {got}"
        )));
    }
    Ok(())
}

fn diagonal_field(win: &Window, cols: &[Vec<f64>]) -> Result<Field<f64>> {
    Field::from_fn(win.clone(), |leaf| {
        DMatrix::from_diagonal(&DVector::from_iterator(
            cols.len(),
            cols.iter().map(|c| c[leaf]),
        ))
    })
}

/// Leaf averages of `|x - x0|^α` for each `α`.
fn power_diagonals(win: &Window, alphas: &[f64], x0: Option<&[f64]>) -> Result<Vec<Vec<f64>>> {
    let d = win.dim();
    let root = win.root();
    let x0: Vec<Coord> = match x0 {
        Some(v) => {
            check_len(v.len(), d, "x0")?;
            v.iter()
                .map(|&x| coord_from_f64(x))
                .collect::<Result<_>>()?
        }
        None => (0..d)
            .map(|i| root.lower(i) + root.side() / Coord::from_integer(2))
            .collect(),
    };
    // The singular point must sit on leaf boundaries along every axis.
    let h = root.side() / Coord::from_integer(1i128 << win.depth());
    for (i, x) in x0.iter().enumerate() {
        if !((*x - root.lower(i)) / h).is_integer() {
            return Err(malformed("x0 must lie on a leaf corner"));
        }
    }
    for &a in alphas {
        if !a.is_finite() || a <= -(d as f64) {
            return Err(malformed(format!("exponent {a} is not locally integrable")));
        }
    }
    let x0f: Vec<f64> = x0.iter().map(|c| coord_to_f64(*c)).collect();
    let rule = gauss_legendre(10);
    Ok(alphas
        .iter()
        .map(|&a| {
            (0..win.leaf_count())
                .map(|leaf| {
                    let (lo, side) = win.leaf_box(leaf);
                    let lo: Vec<f64> = lo.into_iter().map(coord_to_f64).collect();
                    let side = coord_to_f64(side);
                    if d == 1 {
                        interval_power_mean(lo[0] - x0f[0], lo[0] + side - x0f[0], a)
                    } else {
                        cell_power_integral(&lo, side, &x0f, a, &rule, 12) / side.powi(d as i32)
                    }
                })
                .collect()
        })
        .collect())
}

/// `⨍_a^b |t|^α dt` for an interval not straddling 0.
fn interval_power_mean(a: f64, b: f64, alpha: f64) -> f64 {
    let (lo, hi) = if a >= 0.0 { (a, b) } else { (-b, -a) };
    if (alpha + 1.0).abs() < 1e-300 {
        return (hi / lo).ln() / (hi - lo);
    }
    (hi.powf(alpha + 1.0) - lo.powf(alpha + 1.0)) / ((alpha + 1.0) * (hi - lo))
}

/// Gauss–Legendre nodes and weights on `[0,1]`, from the Jacobi matrix.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::zeros(m, m);
    for k in 1..m {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v = eig.eigenvectors[(0, i)];
            ((eig.eigenvalues[i] + 1.0) / 2.0, v * v)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// `∫_cell |x - x0|^α`, refining towards `x0` when it touches the cell.
fn cell_power_integral(
    lo: &[f64],
    side: f64,
    x0: &[f64],
    alpha: f64,
    rule: &[(f64, f64)],
    refine: u32,
) -> f64 {
    let d = lo.len();
    let touches = (0..d).all(|i| x0[i] >= lo[i] - 1e-15 && x0[i] <= lo[i] + side + 1e-15);
    if touches && refine > 0 {
        let half = side / 2.0;
        return (0..1u32 << d)
            .map(|c| {
                let sub: Vec<f64> = (0..d)
                    .map(|i| lo[i] + if c >> i & 1 == 1 { half } else { 0.0 })
                    .collect();
                cell_power_integral(&sub, half, x0, alpha, rule, refine - 1)
            })
            .sum();
    }
    let m = rule.len();
    let mut idx = vec![0usize; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        let mut r2 = 0.0;
        for i in 0..d {
            let (t, wt) = rule[idx[i]];
            w *= wt;
            let x = lo[i] + t * side - x0[i];
            r2 += x * x;
        }
        acc += w * r2.powf(alpha / 2.0);
        let mut i = 0;
        while i < d {
            idx[i] += 1;
            if idx[i] < m {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == d {
            break;
        }
    }
    acc * side.powi(d as i32)
}

fn random_log_spd(
    win: &Window,
    n: usize,
    seed: u64,
    amplitude: f64,
    decay: f64,
) -> Result<Field<f64>> {
    if !(amplitude >= 0.0) || !(decay > 0.0) {
        return Err(malformed(
            "amplitude must be nonnegative and decay positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = win.dim();
    let mut logs = vec![DMatrix::<f64>::zeros(n, n); win.leaf_count()];
    for id in win.interior_cubes() {
        let scale = amplitude * decay.powi(id.level as i32);
        for eps in Signature::cancellative(dim) {
            let mut g = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.random_range(-1.0..1.0) * scale;
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            for leaf in win.leaf_range(id) {
                let s = eps.sign_on_child(win.child_of_leaf(leaf, id.level), dim);
                logs[leaf] += &g * s;
            }
        }
    }
    Field::new(win.clone(), logs.iter().map(linalg::sym_exp).collect())
}
