//! Kinetic modelling of a single polyatomic gas with a continuous internal-energy variable.
//!
//! Particles carry `(v, I)`; collisions are of Borgnakke-Larsen exchange type
//! or frozen (internal energies untouched). The crate provides the kernels,
//! an exact collision sampler, a DSMC driver, moment and entropy diagnostics,
//! and the transport-coefficient fitting used to calibrate kernel parameters.

pub mod collision;
pub mod diagnostics;
pub mod dsmc;
pub mod error;
pub mod gas;
pub mod initial;
pub mod kernel;
pub mod quad;
pub mod special;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
pub use gas::{
    lebesgue_bracket, maxwellian_density, maxwellian_l1_moment, sample_maxwellian, ConservedTotals, Ensemble,
    MaxwellianParams, Particle, Species, UnitSystem, Vec3, BOLTZMANN,
};
pub use collision::{CollisionOutcome, CollisionSampler};
pub use diagnostics::{AveragingReport, CkConfig};
pub use dsmc::{RunOutput, Solver, SolverConfig, TimeSeriesRecord};
pub use initial::InitialCondition;
pub use kernel::{AngularModel, KernelParams, KernelSettings, PairState};
pub use transport::{GasSpec, GasTable, TransportDataset, TransportKind};

/// Random number generator used throughout; seeded explicitly for reproducibility.
pub type SimRng = rand_chacha::ChaCha8Rng;
