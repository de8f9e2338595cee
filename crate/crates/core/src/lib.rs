//! Tubular curvature filter.
//!
//! Interpolates an intensity image (or evaluates an analytic intensity) as a
//! smooth positive function `p`, and computes at every point the curvature of
//! the bundle of curves that run parallel to the tube centerline. The tangent
//! of those curves is the Hessian eigenvector of `log p` with the smallest
//! eigenvalue magnitude; the curvature is the norm of its derivative along
//! itself, obtained by differentiating the eigen-decomposition of the Hessian.
//!
//! The pipeline for one point is
//! [`field_jet`](kernel::IntensityField::jet) → [`log_jet`](logjet::log_jet) →
//! [`eig_sym_sorted`](eigen::eig_sym_sorted) →
//! [`eigvec_jacobian`](curvature::eigvec_jacobian) → `a = J q₁`, `c = ‖a‖`.

pub mod curvature;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod logjet;
pub mod oracle;
pub mod synthetic;
pub mod system;

pub use curvature::{
    curvature_at, curvature_field, eigvec_jacobian, solve_all_directions, CurvatureField,
    CurvatureResult, FieldOptions, Status,
};
pub use eigen::{eig_sym_sorted, EigenFrame};
pub use error::{Result, TcfError};
pub use grid::GridSpec;
pub use kernel::{gaussian_kernel_jet, Backend, DiffJet, DynField, IntensityField, JetOrder};
pub use logjet::{log_jet, LogJet};
pub use synthetic::{make_grid, synth_field, Shape, ShapeSpec};
pub use system::{assemble_system, flatten_t, solve_direction, DirectionSolution, SystemMatrix};

/// Column vector of dimension `N`.
pub type Vector<const N: usize> = nalgebra::SVector<f64, N>;
/// Square `N×N` matrix.
pub type Matrix<const N: usize> = nalgebra::SMatrix<f64, N, N>;
