//! Fourier-Galerkin discretization in velocity.

pub mod collision;
pub mod field;
pub mod lattice;
pub mod weights;

pub use collision::{bilinear_rhs, collision_rhs, symmetric_bilinear_rhs};
pub use field::{grid_points, grid_samples, project_initial, random_hermitian, Norms, SpectralField};
pub use lattice::{mode_lattice, Lattice};
pub use weights::{precompute_weights, precompute_weights_with, weight_hash, WeightOptions, WeightTable};
