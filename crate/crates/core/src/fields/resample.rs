use nalgebra::DMatrix;

use super::Field;
use crate::dyadic::{coord_to_f64, Coord, Grid, Window};
use crate::error::{Error, Result};
use crate::scalar::Real;

impl<T: Real> Field<T> {
    /// Exact cell averages of this step function on the leaves of `target`,
    /// whose root must lie inside this field's root.
    pub fn resample(&self, target: &Window) -> Result<Field<T>> {
        if target == self.window() {
            return Ok(self.clone());
        }
        let src = self.window();
        let root = src.root();
        if !root.contains_box(
            &(0..target.dim())
                .map(|i| target.root().lower(i))
                .collect::<Vec<_>>(),
            target.root().side(),
        ) {
            return Err(Error::OutsideWindow(target.root().address()));
        }
        let d = src.dim();
        let h = root.side() / Coord::from_integer(1i128 << src.depth());
        let cells = 1i128 << src.depth();
        let leaves = (0..target.leaf_count())
            .map(|leaf| {
                let (lo, side) = target.leaf_box(leaf);
                // Per axis: (source index, overlap fraction of the target cell).
                let axes: Vec<Vec<(u64, f64)>> = (0..d)
                    .map(|i| {
                        let a = (lo[i] - root.lower(i)) / h;
                        let b = (lo[i] + side - root.lower(i)) / h;
                        let first = a.floor().to_integer().max(0);
                        let last = b.ceil().to_integer().min(cells);
                        (first..last)
                            .filter_map(|k| {
                                let kk = Coord::from_integer(k);
                                let ov = b.min(kk + 1) - a.max(kk);
                                (ov > Coord::from_integer(0))
                                    .then(|| (k as u64, coord_to_f64(ov * h / side)))
                            })
                            .collect()
                    })
                    .collect();
                let mut acc = DMatrix::zeros(self.rows(), self.cols());
                let mut idx = vec![0usize; d];
                'outer: loop {
                    let mut weight = 1.0;
                    let coords: Vec<u64> = (0..d)
                        .map(|i| {
                            let (k, f) = axes[i][idx[i]];
                            weight *= f;
                            k
                        })
                        .collect();
                    acc += self.leaf(src.leaf_from_coords(&coords)) * T::lit(weight);
                    for i in 0..d {
                        idx[i] += 1;
                        if idx[i] < axes[i].len() {
                            continue 'outer;
                        }
                        idx[i] = 0;
                    }
                    break;
                }
                acc
            })
            .collect();
        Field::new(target.clone(), leaves)
    }

    /// This field seen on the largest window of `grid` inside its root.
    pub fn on_grid(&self, grid: Grid) -> Result<Field<T>> {
        self.resample(&self.window().inscribed(grid)?)
    }
}
