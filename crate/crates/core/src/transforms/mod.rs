//! Haar analysis and synthesis and the dyadic operators built on them.

mod paraproduct;
mod shift;
mod spectrum;
mod square;

use nalgebra::DMatrix;

use crate::dyadic::{CubeId, Window};
use crate::fields::Field;
use crate::scalar::Real;

pub(crate) use paraproduct::mu_multiplier_spectrum;
pub use paraproduct::{
    conjugated_paraproduct, dual_paraproduct, haar_multiplier, mu_multiplier, paraproduct,
    paraproduct_spectrum,
};
pub use shift::{haar_shift, shift_commutator, shift_commutator_terms, CommutatorTerm, ShiftMap};
pub use spectrum::HaarSpectrum;
pub use square::{
    dyadic_square_function, triebel_lizorkin_functional, weighted_square_function,
    weighted_square_function_of,
};

/// `Σ_{I ∋ x} g(I)` on every leaf `x`, over cubes above leaf level.
pub(crate) fn accumulate_down<T: Real>(
    win: &Window,
    rows: usize,
    cols: usize,
    mut g: impl FnMut(CubeId) -> DMatrix<T>,
) -> Field<T> {
    let mut values = vec![DMatrix::zeros(rows, cols); win.cube_count()];
    for id in win.interior_cubes() {
        let here = &values[win.linear(id)] + g(id);
        for child in win.children(id) {
            values[win.linear(child)] = here.clone();
        }
    }
    let leaves = values.split_off(win.level_offset(win.depth()));
    Field::new(win.clone(), leaves).expect("shapes are consistent")
}
