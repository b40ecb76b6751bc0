use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact coordinates: every grid endpoint is `a / (3 * 2^k)`.
pub type Coord = Ratio<i128>;

/// Coordinates beyond this magnitude are outside the universe we model.
pub const UNIVERSE_BOUND: i64 = 1 << 30;

/// One of the `2^d` shifted dyadic grids
/// `D^t = { 2^{-k}([0,1)^d + m + (-1)^k s(t)) }`.
///
/// The shift index `t ∈ [1, 2^d]` maps to the offset vector `s(t) ∈ {0, 1/3}^d`
/// by reading the bits of `t mod 2^d`: bit `i` set means axis `i` is offset by
/// one third. Hence `t = 2^d` is the standard grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    shift: u32,
}

impl Grid {
    pub fn new(dim: usize, shift: u32) -> Result<Self> {
        if dim == 0 || dim > 8 {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} not in 1..=8"
            )));
        }
        if shift == 0 || shift > 1 << dim {
            return Err(Error::InvalidParameter(format!(
                "shift index {shift} not in 1..={}",
                1u32 << dim
            )));
        }
        Ok(Grid { dim, shift })
    }

    pub fn standard(dim: usize) -> Self {
        Grid::new(dim, 1 << dim).expect("valid dimension")
    }

    /// All `2^d` shifted grids, standard grid last.
    pub fn all(dim: usize) -> impl Iterator<Item = Grid> {
        (1..=1u32 << dim).map(move |t| Grid { dim, shift: t })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn is_standard(&self) -> bool {
        self.shift == 1 << self.dim
    }

    /// 1 if axis `i` carries the one-third offset, else 0.
    pub fn offset(&self, axis: usize) -> i128 {
        ((self.shift % (1 << self.dim)) >> axis & 1) as i128
    }

    /// `(-1)^k s_i`, the signed offset numerator (in thirds) at level `k`.
    fn signed_offset(&self, axis: usize, level: i32) -> i128 {
        let s = self.offset(axis);
        if level.rem_euclid(2) == 0 {
            s
        } else {
            -s
        }
    }

    /// Lower endpoint along `axis` of the level-`k` cube with integer coordinate `m`.
    pub fn lower(&self, axis: usize, level: i32, m: i64) -> Coord {
        let num = 3 * m as i128 + self.signed_offset(axis, level);
        scale_pow2(Ratio::new(num, 3), -level)
    }

    /// Integer coordinate of the level-`k` cube whose interval contains `x` along `axis`.
    pub fn index_containing(&self, axis: usize, level: i32, x: Coord) -> i64 {
        // x in [2^{-k}(m + o/3), 2^{-k}(m + 1 + o/3))  <=>  m = floor(2^k x - o/3)
        let y = scale_pow2(x, level) - Ratio::new(self.signed_offset(axis, level), 3);
        y.floor().to_integer() as i64
    }
}

fn scale_pow2(x: Coord, e: i32) -> Coord {
    if e >= 0 {
        x * Ratio::from_integer(1i128 << e)
    } else {
        x / Ratio::from_integer(1i128 << (-e))
    }
}

/// A cube `2^{-k}([0,1)^d + m + (-1)^k s)` of a shifted grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub grid: Grid,
    pub level: i32,
    pub coords: Vec<i64>,
}

impl DyadicCube {
    pub fn new(grid: Grid, level: i32, coords: Vec<i64>) -> Result<Self> {
        if coords.len() != grid.dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coordinates, got {}",
                grid.dim(),
                coords.len()
            )));
        }
        if level.abs() > 60 || coords.iter().any(|m| m.abs() > UNIVERSE_BOUND << 8) {
            return Err(Error::OutsideUniverse);
        }
        Ok(DyadicCube {
            grid,
            level,
            coords,
        })
    }

    /// The unit cube `[0,1)^d` of the standard grid.
    pub fn unit(dim: usize) -> Self {
        DyadicCube {
            grid: Grid::standard(dim),
            level: 0,
            coords: vec![0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn side(&self) -> Coord {
        scale_pow2(Ratio::from_integer(1), -self.level)
    }

    pub fn side_f64(&self) -> f64 {
        2f64.powi(-self.level)
    }

    pub fn volume_f64(&self) -> f64 {
        2f64.powi(-self.level * self.dim() as i32)
    }

    pub fn lower(&self, axis: usize) -> Coord {
        self.grid.lower(axis, self.level, self.coords[axis])
    }

    pub fn upper(&self, axis: usize) -> Coord {
        self.lower(axis) + self.side()
    }

    pub fn lower_f64(&self, axis: usize) -> f64 {
        coord_to_f64(self.lower(axis))
    }

    /// The `2^d` children; child `c` has bit `i` set when it is the upper half along axis `i`.
    pub fn children(&self) -> Vec<DyadicCube> {
        (0..1u32 << self.dim()).map(|c| self.child(c)).collect()
    }

    pub fn child(&self, c: u32) -> DyadicCube {
        let coords = (0..self.dim())
            .map(|i| {
                let b = (c >> i & 1) as i64;
                2 * self.coords[i] + self.grid.signed_offset(i, self.level) as i64 + b
            })
            .collect();
        DyadicCube {
            grid: self.grid,
            level: self.level + 1,
            coords,
        }
    }

    pub fn contains(&self, other: &DyadicCube) -> bool {
        (0..self.dim()).all(|i| self.lower(i) <= other.lower(i) && other.upper(i) <= self.upper(i))
    }

    pub fn contains_box(&self, lower: &[Coord], side: Coord) -> bool {
        (0..self.dim()).all(|i| self.lower(i) <= lower[i] && lower[i] + side <= self.upper(i))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|i| {
            let lo = coord_to_f64(self.lower(i));
            let hi = coord_to_f64(self.upper(i));
            lo <= x[i] && x[i] < hi
        })
    }

    /// Serialized address `t/k/m1,...,md`.
    pub fn address(&self) -> String {
        self.to_string()
    }

    pub fn parse_address(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("bad cube address '{s}'"));
        let mut parts = s.split('/');
        let t: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let k: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let coords: Vec<i64> = parts
            .next()
            .ok_or_else(bad)?
            .split(',')
            .map(|m| m.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let grid = Grid::new(coords.len(), t)?;
        DyadicCube::new(grid, k, coords)
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/", self.grid.shift(), self.level)?;
        for (i, m) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

pub fn coord_to_f64(c: Coord) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

/// Exact dyadic rational for an `f64` (every finite double is one).
pub fn coord_from_f64(x: f64) -> Result<Coord> {
    if !x.is_finite() || x.abs() > UNIVERSE_BOUND as f64 {
        return Err(Error::OutsideUniverse);
    }
    let mut den: i128 = 1;
    let mut v = x;
    while v.fract() != 0.0 {
        v *= 2.0;
        den *= 2;
        if den > 1i128 << 80 {
            return Err(Error::OutsideUniverse);
        }
    }
    Ok(Ratio::new(v as i128, den))
}

/// `h_I^ε(x)`: the product of one-dimensional Haar factors, zero off `I`.
///
/// `h^1 = |I_i|^{-1/2} χ`, `h^0 = |I_i|^{-1/2} (χ_left - χ_right)`.
pub fn haar_eval(cube: &DyadicCube, eps: super::Signature, x: &[f64]) -> f64 {
    if !cube.contains_point(x) {
        return 0.0;
    }
    let side = cube.side_f64();
    let mut v = 1.0;
    for (i, &xi) in x.iter().enumerate().take(cube.dim()) {
        v /= side.sqrt();
        if !eps.bit(i) {
            let mid = cube.lower_f64(i) + side / 2.0;
            if xi >= mid {
                v = -v;
            }
        }
    }
    v
}

/// Finds a cube of one of the `2^d` shifted grids containing the axis-parallel
/// cube `lower + [0, side)^d` with side length at most `6 * side`.
///
/// The search scans levels from the finest admissible one upward across all
/// shifts and returns the smallest container found.
pub fn containing_shifted_cube(lower: &[Coord], side: Coord) -> Result<(Grid, DyadicCube)> {
    let dim = lower.len();
    let zero = Ratio::from_integer(0);
    if dim == 0 || side <= zero {
        return Err(Error::InvalidParameter(
            "cube needs positive side and dimension".into(),
        ));
    }
    let bound = Ratio::from_integer(UNIVERSE_BOUND as i128);
    if lower.iter().any(|&a| a < -bound || a + side > bound) || side > bound {
        return Err(Error::OutsideUniverse);
    }
    // finest level k with 2^{-k} >= side
    let mut k: i32 = 0;
    while scale_pow2(Ratio::from_integer(1), -k) < side {
        k -= 1;
    }
    while scale_pow2(Ratio::from_integer(1), -(k + 1)) >= side {
        k += 1;
    }
    let limit = side * Ratio::from_integer(6);
    loop {
        let len = scale_pow2(Ratio::from_integer(1), -k);
        if len > limit {
            return Err(Error::InvalidParameter(
                "no shifted cube within ratio 6".into(),
            ));
        }
        for grid in Grid::all(dim) {
            let coords: Vec<i64> = (0..dim)
                .map(|i| grid.index_containing(i, k, lower[i]))
                .collect();
            let cand = DyadicCube {
                grid,
                level: k,
                coords,
            };
            if cand.contains_box(lower, side) {
                return Ok((grid, cand));
            }
        }
        k -= 1;
    }
}

/// The first level-`level` cube of `grid` (in coordinate order) contained in `outer`.
pub fn inscribed_cube(grid: Grid, outer: &DyadicCube, level: i32) -> Option<DyadicCube> {
    let dim = grid.dim();
    let mut coords = Vec::with_capacity(dim);
    for i in 0..dim {
        let lo = outer.lower(i);
        // smallest m with lower(m) >= lo
        let mut m = grid.index_containing(i, level, lo);
        if grid.lower(i, level, m) < lo {
            m += 1;
        }
        coords.push(m);
    }
    let cand = DyadicCube {
        grid,
        level,
        coords,
    };
    outer.contains(&cand).then_some(cand)
}
