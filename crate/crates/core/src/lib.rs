//! Numerical toolkit for driven-dissipative Kerr oscillators.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: truncated Fock-space operators, Hamiltonians and states.
//! - [`liouville`]: Lindblad superoperators, steady states, time evolution and
//!   relaxation-time fits.
//! - [`spectral`]: Liouvillian eigenanalysis and the quantum escape rate.
//! - [`metapotential`]: classical fixed points, bistability, the quartic
//!   metapotential, Kramers rates and the crossover parameter.
//! - [`stochastic`]: semiclassical Langevin trajectories and the two-mode
//!   heterodyne stochastic master equation.
//! - [`circuit`]: normal modes and Kerr couplings of a Josephson-junction array.
//!
//! Dynamical modules work in units where a reference linewidth is 1; the
//! circuit module uses SI units.

pub mod circuit;
pub mod error;
pub mod fit;
pub mod hilbert;
pub mod liouville;
pub mod metapotential;
pub mod spectral;
pub mod stochastic;

pub use error::{KerrError, Result};
pub use fit::RelaxationFit;
pub use hilbert::{DrivePhase, FockDim, Ket, ModeParams, OperatorMatrix, TwoModeParams, C64};
pub use liouville::{DensityMatrix, EvolutionResult, Superoperator};
pub use metapotential::{ClassicalFixedPoints, CrossoverResult, MetapotentialProfile};
pub use spectral::{LiouvillianSpectrum, SlowMode};
pub use stochastic::{HeterodyneRun, LineshapePoint, NoisePath, SemiclassicalTrajectory};
