use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::grid::{Coord, DyadicCube, Grid};
use super::Signature;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A cube of a [`Window`], addressed by its level below the root and its
/// Morton (Z-order) index within that level.
///
/// With Morton ordering the leaves under any cube form a contiguous range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub level: u32,
    pub index: u64,
}

/// A finite truncation of a dyadic grid: a root cube refined `depth` times.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    root: DyadicCube,
    depth: u32,
}

impl Window {
    pub fn new(root: DyadicCube, depth: u32) -> Result<Self> {
        let bits = root.dim() as u64 * depth as u64;
        if depth == 0 || bits > 40 {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} in dimension {} is out of range",
                root.dim()
            )));
        }
        Ok(Window { root, depth })
    }

    /// `[0,1)^d` in the standard grid.
    pub fn unit(dim: usize, depth: u32) -> Result<Self> {
        Window::new(DyadicCube::unit(dim), depth)
    }

    pub fn root(&self) -> &DyadicCube {
        &self.root
    }

    pub fn grid(&self) -> Grid {
        self.root.grid
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn children_per_cube(&self) -> usize {
        1 << self.dim()
    }

    pub fn leaf_count(&self) -> usize {
        1usize << (self.dim() as u32 * self.depth)
    }

    pub fn cubes_at_level(&self, level: u32) -> u64 {
        1u64 << (self.dim() as u32 * level)
    }

    /// Position of the first cube of `level` in the all-levels linear order.
    pub fn level_offset(&self, level: u32) -> usize {
        let c = self.children_per_cube() as u64;
        ((c.pow(level) - 1) / (c - 1)) as usize
    }

    /// All cubes, leaves included.
    pub fn cube_count(&self) -> usize {
        self.level_offset(self.depth + 1)
    }

    /// Cubes strictly above leaf level; these carry Haar functions.
    pub fn interior_count(&self) -> usize {
        self.level_offset(self.depth)
    }

    pub fn linear(&self, id: CubeId) -> usize {
        self.level_offset(id.level) + id.index as usize
    }

    pub fn from_linear(&self, mut lin: usize) -> CubeId {
        let mut level = 0;
        loop {
            let n = self.cubes_at_level(level) as usize;
            if lin < n {
                return CubeId {
                    level,
                    index: lin as u64,
                };
            }
            lin -= n;
            level += 1;
        }
    }

    pub fn root_id(&self) -> CubeId {
        CubeId { level: 0, index: 0 }
    }

    pub fn cubes_at(&self, level: u32) -> impl Iterator<Item = CubeId> {
        (0..self.cubes_at_level(level)).map(move |index| CubeId { level, index })
    }

    /// Every cube, coarse to fine.
    pub fn cubes(&self) -> impl Iterator<Item = CubeId> + '_ {
        (0..=self.depth).flat_map(move |l| self.cubes_at(l))
    }

    /// Cubes with Haar functions (levels `0..depth`), coarse to fine.
    pub fn interior_cubes(&self) -> impl Iterator<Item = CubeId> + '_ {
        (0..self.depth).flat_map(move |l| self.cubes_at(l))
    }

    pub fn is_leaf(&self, id: CubeId) -> bool {
        id.level == self.depth
    }

    pub fn leaf_range(&self, id: CubeId) -> Range<usize> {
        let per = 1usize << (self.dim() as u32 * (self.depth - id.level));
        let start = id.index as usize * per;
        start..start + per
    }

    pub fn leaves_per_cube(&self, level: u32) -> usize {
        1usize << (self.dim() as u32 * (self.depth - level))
    }

    pub fn leaf_id(&self, leaf: usize) -> CubeId {
        CubeId {
            level: self.depth,
            index: leaf as u64,
        }
    }

    pub fn children(&self, id: CubeId) -> impl Iterator<Item = CubeId> {
        let c = self.children_per_cube() as u64;
        (0..c).map(move |k| CubeId {
            level: id.level + 1,
            index: id.index * c + k,
        })
    }

    pub fn child(&self, id: CubeId, c: u32) -> CubeId {
        CubeId {
            level: id.level + 1,
            index: id.index * self.children_per_cube() as u64 + c as u64,
        }
    }

    pub fn parent(&self, id: CubeId) -> Option<CubeId> {
        (id.level > 0).then(|| CubeId {
            level: id.level - 1,
            index: id.index / self.children_per_cube() as u64,
        })
    }

    /// Child index of `id` within its parent.
    pub fn child_position(&self, id: CubeId) -> u32 {
        (id.index % self.children_per_cube() as u64) as u32
    }

    /// `true` if `inner` is `outer` or one of its descendants.
    pub fn contains(&self, outer: CubeId, inner: CubeId) -> bool {
        inner.level >= outer.level
            && inner.index >> (self.dim() as u32 * (inner.level - outer.level)) == outer.index
    }

    /// The ancestor of `id` at `level` (`level <= id.level`).
    pub fn ancestor(&self, id: CubeId, level: u32) -> CubeId {
        CubeId {
            level,
            index: id.index >> (self.dim() as u32 * (id.level - level)),
        }
    }

    /// Which child of the level-`level` cube containing `leaf` holds it.
    pub fn child_of_leaf(&self, leaf: usize, level: u32) -> u32 {
        let shift = self.dim() as u32 * (self.depth - level - 1);
        ((leaf >> shift) & (self.children_per_cube() - 1)) as u32
    }

    /// Sign and magnitude of `h_I^ε` on a leaf inside `I`.
    pub fn haar_on_leaf<T: Real>(&self, id: CubeId, eps: Signature, leaf: usize) -> T {
        let c = self.child_of_leaf(leaf, id.level);
        T::lit(eps.sign_on_child(c, self.dim())) / self.volume::<T>(id.level).sqrt()
    }

    /// Relative integer coordinates of a cube along each axis.
    pub fn local_coords(&self, id: CubeId) -> Vec<u64> {
        let d = self.dim();
        let mut out = vec![0u64; d];
        for j in 0..id.level {
            let digit = (id.index >> (d as u32 * (id.level - 1 - j))) & ((1 << d) - 1);
            for (i, o) in out.iter_mut().enumerate() {
                *o = (*o << 1) | (digit >> i & 1);
            }
        }
        out
    }

    /// Inverse of [`Window::local_coords`] for leaves.
    pub fn leaf_from_coords(&self, coords: &[u64]) -> usize {
        let d = self.dim();
        let mut leaf = 0usize;
        for j in (0..self.depth).rev() {
            let mut digit = 0usize;
            for (i, p) in coords.iter().enumerate() {
                digit |= ((p >> j & 1) as usize) << i;
            }
            leaf = (leaf << d) | digit;
        }
        leaf
    }

    /// `|I|` for a cube at `level` below the root.
    pub fn volume<T: Real>(&self, level: u32) -> T {
        T::pow2(-(self.root.level + level as i32) * self.dim() as i32)
    }

    pub fn leaf_volume<T: Real>(&self) -> T {
        self.volume(self.depth)
    }

    /// Absolute address of a window cube.
    pub fn cube(&self, id: CubeId) -> DyadicCube {
        let d = self.dim() as u32;
        let mut c = self.root.clone();
        for j in 0..id.level {
            let digit = (id.index >> (d * (id.level - 1 - j))) as u32 & ((1 << d) - 1);
            c = c.child(digit);
        }
        c
    }

    /// Window position of an absolute cube.
    pub fn locate(&self, cube: &DyadicCube) -> Result<CubeId> {
        let outside = || Error::OutsideWindow(cube.address());
        if cube.grid != self.grid() || cube.level < self.root.level {
            return Err(outside());
        }
        let level = (cube.level - self.root.level) as u32;
        if level > self.depth || !self.root.contains(cube) {
            return Err(outside());
        }
        let d = self.dim();
        let mut cur = self.root.clone();
        let mut index = 0u64;
        for _ in 0..level {
            let mut found = None;
            for c in 0..1u32 << d {
                let k = cur.child(c);
                if k.contains(cube) {
                    found = Some((c, k));
                    break;
                }
            }
            let (c, k) = found.ok_or_else(outside)?;
            index = (index << d) | c as u64;
            cur = k;
        }
        Ok(CubeId { level, index })
    }

    pub fn address(&self, id: CubeId) -> String {
        self.cube(id).address()
    }

    /// Lower corner (exact) and side of a leaf.
    pub fn leaf_box(&self, leaf: usize) -> (Vec<Coord>, Coord) {
        let c = self.cube(self.leaf_id(leaf));
        ((0..self.dim()).map(|i| c.lower(i)).collect(), c.side())
    }

    pub fn leaf_center(&self, leaf: usize) -> Vec<f64> {
        let c = self.cube(self.leaf_id(leaf));
        (0..self.dim())
            .map(|i| c.lower_f64(i) + c.side_f64() / 2.0)
            .collect()
    }

    /// Leaf index containing a point, if it lies in the root.
    pub fn leaf_containing(&self, x: &[f64]) -> Option<usize> {
        if !self.root.contains_point(x) {
            return None;
        }
        let side = self.root.side_f64();
        let n = 1u64 << self.depth;
        let per_axis: Vec<u64> = (0..self.dim())
            .map(|i| {
                let t = (x[i] - self.root.lower_f64(i)) / side * n as f64;
                (t.floor() as u64).min(n - 1)
            })
            .collect();
        Some(self.leaf_from_coords(&per_axis))
    }

    pub fn same_shape(&self, other: &Window) -> bool {
        self == other
    }

    /// Window in `grid` with the same leaf level, rooted at the coarsest cube of
    /// `grid` that fits inside this window's root.
    pub fn inscribed(&self, grid: Grid) -> Result<Window> {
        if grid == self.grid() {
            return Ok(self.clone());
        }
        let leaf_level = self.root.level + self.depth as i32;
        for level in self.root.level..leaf_level {
            if let Some(root) = super::grid::inscribed_cube(grid, &self.root, level) {
                return Window::new(root, (leaf_level - level) as u32);
            }
        }
        Err(Error::InvalidParameter(format!(
            "no cube of grid {} fits inside {}",
            grid.shift(),
            self.root
        )))
    }
}
