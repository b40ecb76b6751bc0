//! Matrix weights, dyadic Haar analysis and matrix-weighted BMO.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bmo;
pub mod dyadic;
pub mod error;
pub mod fields;
pub mod linalg;
pub mod opnorm;
pub mod scalar;
pub mod stopping;
pub mod transforms;

pub use dyadic::{CubeId, DyadicCube, Grid, Signature, Window};
pub use error::{Error, Result};
pub use fields::{Field, ReducingTable, WeightSpec};
pub use opnorm::{Operator, OperatorMatrix};
pub use scalar::Real;
pub use transforms::{HaarSpectrum, ShiftMap};

pub type FieldF64 = Field<f64>;
pub type HaarSpectrumF64 = HaarSpectrum<f64>;
pub type ReducingTableF64 = ReducingTable<f64>;
pub type WeightPairF64 = bmo::WeightPair<f64>;
