//! Numerical machinery for the bosonic Fokker-Planck equation with
//! superlinear drift in the mass-supercritical regime: the regularized
//! mobility family, free-energy minimizer theory with condensation above
//! the critical mass, a finite-difference solver for the radial
//! partial-mass equation, a mild-solution kernel oracle for short-time
//! cross-validation, and continuation in the regularization parameter to
//! follow solutions beyond blow-up.

pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{GridConfig, RadialGrid};
pub use model::{CutoffProfile, MinimizerMeasure, ModelParams, RegularizedPotential};
pub use solver::{MassState, Scenario, Solver, SolverConfig, Trajectory};
