//! Matrix and vector step functions on a window, matrix weights and their
//! characteristics.

mod ap;
mod generate;
mod io;
mod reducing;
mod resample;

use nalgebra::DMatrix;

use crate::dyadic::{CubeId, DyadicCube, Window};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

pub(crate) use ap::check_exponent;
pub use ap::{a2_averaged, ap_characteristic, ap_characteristic_in_window, conjugate, ApReport};
pub use generate::{generate_weight, Diagonal, WeightKind, WeightSpec};
pub use io::{read_field, write_field, FieldHeader};
pub use reducing::{
    direction_net, reducing_operator, verify_reducing_comparability, ComparabilityReport,
    Provenance, ReducingTable,
};

/// A piecewise-constant `rows × cols` matrix function, one value per leaf.
///
/// Vector fields are fields with a single column. A *weight* is a square field
/// whose leaves are symmetric positive definite; see [`Field::check_weight`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T: Real> {
    window: Window,
    rows: usize,
    cols: usize,
    leaves: Vec<DMatrix<T>>,
}

impl<T: Real> Field<T> {
    pub fn new(window: Window, leaves: Vec<DMatrix<T>>) -> Result<Self> {
        if leaves.len() != window.leaf_count() {
            return Err(Error::Mismatch(format!(
                "{} leaf values for a window with {} leaves",
                leaves.len(),
                window.leaf_count()
            )));
        }
        let (rows, cols) = leaves.first().map(|m| m.shape()).unwrap_or((0, 0));
        if rows == 0 || cols == 0 || leaves.iter().any(|m| m.shape() != (rows, cols)) {
            return Err(Error::Mismatch("leaf values differ in shape".into()));
        }
        Ok(Field {
            window,
            rows,
            cols,
            leaves,
        })
    }

    pub fn from_fn(window: Window, f: impl FnMut(usize) -> DMatrix<T>) -> Result<Self> {
        let leaves = (0..window.leaf_count()).map(f).collect();
        Field::new(window, leaves)
    }

    pub fn constant(window: Window, value: DMatrix<T>) -> Self {
        let (rows, cols) = value.shape();
        let leaves = vec![value; window.leaf_count()];
        Field {
            window,
            rows,
            cols,
            leaves,
        }
    }

    pub fn zeros(window: Window, rows: usize, cols: usize) -> Self {
        Field::constant(window, DMatrix::zeros(rows, cols))
    }

    pub fn identity(window: Window, n: usize) -> Self {
        Field::constant(window, DMatrix::identity(n, n))
    }

    /// Scalar field from per-leaf values.
    pub fn scalar(window: Window, values: &[T]) -> Result<Self> {
        Field::new(
            window,
            values
                .iter()
                .map(|&v| DMatrix::from_element(1, 1, v))
                .collect(),
        )
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn leaf(&self, i: usize) -> &DMatrix<T> {
        &self.leaves[i]
    }

    pub fn leaves(&self) -> &[DMatrix<T>] {
        &self.leaves
    }

    pub fn into_leaves(self) -> Vec<DMatrix<T>> {
        self.leaves
    }

    pub fn same_window(&self, other: &Field<T>) -> Result<()> {
        if self.window != other.window {
            return Err(Error::Mismatch("fields live on different windows".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(&DMatrix<T>) -> DMatrix<T>) -> Field<T> {
        let leaves: Vec<_> = self.leaves.iter().map(f).collect();
        let (rows, cols) = leaves[0].shape();
        Field {
            window: self.window.clone(),
            rows,
            cols,
            leaves,
        }
    }

    pub fn try_map(&self, f: impl Fn(&DMatrix<T>) -> Result<DMatrix<T>>) -> Result<Field<T>> {
        let leaves = self.leaves.iter().map(f).collect::<Result<Vec<_>>>()?;
        Field::new(self.window.clone(), leaves)
    }

    pub fn zip_map(
        &self,
        other: &Field<T>,
        f: impl Fn(&DMatrix<T>, &DMatrix<T>) -> DMatrix<T>,
    ) -> Result<Field<T>> {
        self.same_window(other)?;
        let leaves = self
            .leaves
            .iter()
            .zip(&other.leaves)
            .map(|(a, b)| f(a, b))
            .collect();
        Field::new(self.window.clone(), leaves)
    }

    /// Pointwise product `A(x) B(x)`.
    pub fn mul(&self, other: &Field<T>) -> Result<Field<T>> {
        if self.cols != other.rows {
            return Err(Error::Mismatch(format!(
                "cannot multiply {}x{} by {}x{} leaves",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_shape(other)?;
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Field<T>> {
        self.check_shape(other)?;
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Field<T> {
        self.map(|a| a * s)
    }

    pub fn transpose(&self) -> Field<T> {
        self.map(|a| a.transpose())
    }

    fn check_shape(&self, other: &Field<T>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Mismatch("fields differ in value shape".into()));
        }
        Ok(())
    }

    /// Mean of the leaf values under a window cube.
    pub fn average_id(&self, id: CubeId) -> DMatrix<T> {
        let range = self.window.leaf_range(id);
        let len = T::from_usize_lossy(range.len());
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        for m in &self.leaves[range] {
            acc += m;
        }
        acc / len
    }

    /// `m_I F` for an absolute cube.
    pub fn average(&self, cube: &DyadicCube) -> Result<DMatrix<T>> {
        Ok(self.average_id(self.window.locate(cube)?))
    }

    /// Averages over every window cube, indexed by [`Window::linear`].
    pub fn averages(&self) -> Averages<T> {
        let w = &self.window;
        let mut data = vec![DMatrix::zeros(self.rows, self.cols); w.cube_count()];
        let off = w.level_offset(w.depth());
        for (i, m) in self.leaves.iter().enumerate() {
            data[off + i] = m.clone();
        }
        let inv = T::lit(1.0 / w.children_per_cube() as f64);
        for level in (0..w.depth()).rev() {
            for id in w.cubes_at(level) {
                let mut acc = DMatrix::zeros(self.rows, self.cols);
                for c in w.children(id) {
                    acc += &data[w.linear(c)];
                }
                data[w.linear(id)] = acc * inv;
            }
        }
        Averages {
            window: w.clone(),
            data,
        }
    }

    /// Conditional expectation onto cubes `level` steps below the root:
    /// every leaf takes the average of its ancestor at that level.
    pub fn coarsen(&self, level: u32) -> Field<T> {
        let win = &self.window;
        let level = level.min(win.depth());
        let mut leaves = self.leaves.clone();
        for id in win.cubes_at(level) {
            let m = self.average_id(id);
            for leaf in win.leaf_range(id) {
                leaves[leaf] = m.clone();
            }
        }
        Field {
            window: win.clone(),
            rows: self.rows,
            cols: self.cols,
            leaves,
        }
    }

    /// `∫ F` over the window.
    pub fn integral(&self) -> DMatrix<T> {
        self.average_id(self.window.root_id()) * self.window.volume::<T>(0)
    }

    /// `∫ tr(F Gᵀ)`: the real Frobenius pairing.
    pub fn pairing(&self, other: &Field<T>) -> Result<T> {
        self.same_window(other)?;
        self.check_shape(other)?;
        let mut acc = T::zero();
        for (a, b) in self.leaves.iter().zip(&other.leaves) {
            acc += a.dot(b);
        }
        Ok(acc * self.window.leaf_volume::<T>())
    }

    /// `∫ ‖F‖_F²`.
    pub fn norm_sq(&self) -> T {
        let mut acc = T::zero();
        for a in &self.leaves {
            acc += a.norm_squared();
        }
        acc * self.window.leaf_volume::<T>()
    }

    /// Errors unless every leaf is symmetric positive definite.
    pub fn check_weight(&self) -> Result<()> {
        if self.rows != self.cols {
            return Err(Error::Mismatch("a weight must be square".into()));
        }
        for m in &self.leaves {
            let scale = m.amax().max(T::one());
            let asym = linalg::asymmetry(m);
            if asym > T::lit(1e-12) * scale {
                return Err(Error::NotSymmetric(asym.to_f64_lossy()));
            }
            let min = linalg::min_eigenvalue(m);
            if !(min > T::lit(linalg::POSITIVITY_FLOOR)) {
                return Err(Error::NotPositiveDefinite(min.to_f64_lossy()));
            }
        }
        Ok(())
    }

    pub fn is_weight(&self) -> bool {
        self.check_weight().is_ok()
    }

    /// Per-leaf spectral power `W(x)^s` of a weight.
    pub fn pointwise_power(&self, s: T) -> Result<Field<T>> {
        if self.rows != self.cols {
            return Err(Error::Mismatch("powers need square leaves".into()));
        }
        self.try_map(|m| linalg::spd_power(m, s))
    }

    pub fn inverse(&self) -> Result<Field<T>> {
        self.try_map(linalg::spd_inverse)
    }

    /// Copy with values converted to another scalar type.
    pub fn cast<S: Real>(&self) -> Field<S> {
        let leaves = self
            .leaves
            .iter()
            .map(|m| m.map(|x| S::lit(x.to_f64_lossy())))
            .collect();
        Field {
            window: self.window.clone(),
            rows: self.rows,
            cols: self.cols,
            leaves,
        }
    }
}

/// Cube averages of a field, the bottom-up pyramid.
#[derive(Clone, Debug)]
pub struct Averages<T: Real> {
    window: Window,
    data: Vec<DMatrix<T>>,
}

impl<T: Real> Averages<T> {
    pub fn get(&self, id: CubeId) -> &DMatrix<T> {
        &self.data[self.window.linear(id)]
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn as_slice(&self) -> &[DMatrix<T>] {
        &self.data
    }
}
