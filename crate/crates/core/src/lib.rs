//! An implicit graph-network solver for Poisson problems with mixed
//! Dirichlet/Neumann boundary conditions on unstructured triangular meshes.
//!
//! The pipeline, end to end:
//!
//! * [`mesh`] — random smooth 2D domains, Delaunay-style triangulation,
//!   boundary-condition typing, mesh I/O;
//! * [`fem`] — P1 Galerkin assembly of `-Δu = f` and the LU ground truth;
//! * [`dataset`] — graph records with typed node features, normalization
//!   statistics and train/val/test splits;
//! * [`diffcore`] — a dense-tensor trace with reverse-mode differentiation,
//!   including differentiable vector-Jacobian products;
//! * [`blocks`] / [`processor`] — the trainable message-passing equilibrium
//!   map over the problem graph;
//! * [`equilibrium`] — Picard/Anderson/Broyden fixed-point solvers, the
//!   implicit backward pass, the Hutchinson Frobenius-norm estimator and
//!   power-iteration spectral-radius audits;
//! * [`training`] — the composite physics-informed loss, the two-rate Adam
//!   optimizer and the training loop;
//! * [`evaluation`] — metrics and the experiment suite (out-of-distribution
//!   meshes, initializer study, solver swap, spectral report).
//!
//! The numerical core is generic over the floating-point type through
//! [`scalar::Scalar`]; the pipeline types are aliased to [`Real`] (`f64`).

pub mod blocks;
pub mod dataset;
pub mod diffcore;
pub mod equilibrium;
pub mod evaluation;
pub mod fem;
pub mod mesh;
pub mod processor;
pub mod scalar;
pub mod sparse;
pub mod training;

pub use scalar::Scalar;

/// Scalar type used by the shipped pipeline (datasets, training, CLI).
pub type Real = f64;

/// Dense tensor at pipeline precision.
pub type RealTensor = diffcore::Tensor<Real>;

/// Recording trace at pipeline precision.
pub type RealTape = diffcore::Tape<Real>;
