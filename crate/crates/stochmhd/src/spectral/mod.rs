//! Fourier-space fields on the two-dimensional torus and the basic operators acting on them.

pub mod field;
pub mod grid;
pub mod ops;
pub mod random;
pub mod serialize;

pub use field::{SpectralField, TensorField2, TensorField4, VectorField};
pub use grid::Grid;
pub use ops::{
    advect, divergence_tensor, dot, fractional_laplacian, grad, grad_decompose, heat_propagate,
    inner_product, leray_project, leray_project_strict, tensor_product, transverse_mode, Flavor,
};
