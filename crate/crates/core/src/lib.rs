//! Numerical laboratory for a harmonic chain coupled to a point Langevin
//! thermostat: dispersion relations, the thermostat memory kernel, interface
//! scattering coefficients, lattice dynamics, Wigner-distribution estimators
//! and their kinetic limit.

pub mod dispersion;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod memory;
pub mod quadrature;
pub mod scattering;
pub mod wigner;

pub use dispersion::{CouplingKernel, DispersionKind, DispersionRelation, KernelPreset};
pub use error::{Error, Result};
pub use memory::{MemoryKernel, MemoryKernelConfig, Resolvent};
pub use scattering::{Coefficients, ScatteringTable};
pub use dynamics::{Chain, ChainState, NoisePath, ThermostatParams, Trajectory};
