//! Dense complex linear algebra and the operator vocabulary of the model.

mod density;
mod matrix;
pub mod operators;
mod sparse;
pub mod superop;

pub use density::{partial_trace_keep_qubit, partial_trace_resonator, purity, trace_distance_qubit, DensityMatrix};
pub use matrix::ComplexMatrix;
pub use operators::{coherent_state, displacement_matrix};
pub use sparse::SparseMatrix;
pub use superop::{dissipator_apply, jump_apply, jump_unnorm_apply, measure_apply, measure_unnorm_apply, SuperopKind};
