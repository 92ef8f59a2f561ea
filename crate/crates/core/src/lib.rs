//! Numerics for a two-dimensional sessile capillary droplet written in polar
//! form `r = rho(theta)` above a flat support.
//!
//! The crate computes equilibrium shapes by volume-constrained energy
//! minimization, checks the translation kernel and positivity of the second
//! variation, recentres perturbed shapes on a moving pole, and relaxes
//! perturbed drops with a volume-preserving gradient flow.
//!
//! Discretization in one paragraph: profiles live on a uniform angular grid.
//! Energies are evaluated on the piecewise-quadratic interpolant of the nodal
//! values (piecewise-linear when the cell count is odd) with Gauss quadrature
//! for terms involving `rho'`, and with the Simpson (or trapezoid) nodal
//! weights for the rest. Those nodal weights are also the lumped mass, so the
//! discrete Euler-Lagrange system is a consistent approximation of the
//! continuous one and the volume constraint is the Simpson value of `int rho^2`.

pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod moving_frame;
pub mod numerics;
pub mod relax;
pub mod spectral;

mod elements;

pub use energy::{PhysicalParams, VariationReport};
pub use equilibrium::{ContinuationReport, EquilibriumSolution, SolverOptions, SymmetryReport};
pub use error::{Error, Result};
pub use geometry::{AngularGrid, CartesianCurve, SurfaceProfile};
pub use moving_frame::MovingFrameState;
pub use relax::{RelaxOptions, RelaxationTrace};
pub use spectral::{KernelConstruction, SigmaForm, SpectralDecomposition, Subspace};
