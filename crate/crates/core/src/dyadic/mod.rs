//! Shifted dyadic grids, cubes, finite windows and the Haar system.

mod grid;
mod signature;
mod window;

pub use grid::{
    containing_shifted_cube, coord_from_f64, coord_to_f64, haar_eval, inscribed_cube, Coord,
    DyadicCube, Grid, UNIVERSE_BOUND,
};
pub use signature::Signature;
pub use window::{CubeId, Window};
