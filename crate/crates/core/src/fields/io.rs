use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Field;
use crate::dyadic::{DyadicCube, Grid, Window};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// First line of a field dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub d: usize,
    pub depth: u32,
    pub shift: u32,
    pub root_level: i32,
    pub root: Vec<i64>,
}

/// Writes a JSON header line followed by every leaf matrix as little-endian
/// `f64` values in row-major order.
pub fn write_field<T: Real, W: Write>(field: &Field<T>, mut out: W) -> Result<()> {
    let win = field.window();
    let root = win.root();
    let header = FieldHeader {
        n: field.rows(),
        rows: field.rows(),
        cols: field.cols(),
        d: win.dim(),
        depth: win.depth(),
        shift: win.grid().shift(),
        root_level: root.level,
        root: root.coords.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(field.rows() * field.cols() * 8);
    for m in field.leaves() {
        buf.clear();
        for r in 0..field.rows() {
            for c in 0..field.cols() {
                buf.extend_from_slice(&m[(r, c)].to_f64_lossy().to_le_bytes());
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_field<T: Real, R: BufRead>(mut input: R) -> Result<Field<T>> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let h: FieldHeader = serde_json::from_str(line.trim_end())?;
    let grid = Grid::new(h.d, h.shift)?;
    let win = Window::new(DyadicCube::new(grid, h.root_level, h.root)?, h.depth)?;
    let mut bytes = vec![0u8; h.rows * h.cols * 8];
    let mut leaves = Vec::with_capacity(win.leaf_count());
    for _ in 0..win.leaf_count() {
        input.read_exact(&mut bytes)?;
        let vals = bytes
            .chunks_exact(8)
            .map(|b| T::lit(f64::from_le_bytes(b.try_into().expect("8 bytes"))));
        leaves.push(DMatrix::from_row_iterator(h.rows, h.cols, vals));
    }
    if !input.fill_buf()?.is_empty() {
        return Err(Error::Mismatch("trailing bytes after field data".into()));
    }
    Field::new(win, leaves)
}
