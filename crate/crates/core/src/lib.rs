//! Fourier-Galerkin / gPC solver for the spatially homogeneous Boltzmann
//! equation with an uncertain collision kernel.

pub mod diagnostics;
pub mod error;
pub mod gpc;
pub mod kernel;
pub mod oracle;
pub mod quadrature;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use kernel::{
    bilinear_bound, check_assumptions, eval_b_sym, eval_phi, AngularBase, AssumptionReport, Domain, KernelSpec,
    KineticForm, RandomFactor,
};
pub use quadrature::{gauss_legendre, uniform_circle, QuadratureRule, QuadratureSizes, ResolvedSizes};
pub use spectral::{collision_rhs, mode_lattice, precompute_weights, SpectralField, WeightTable};
