//! Wigner-distribution side of the laboratory: initial measures, the
//! Monte-Carlo estimator, the closed-form limit and the comparison
//! experiments.

pub mod estimate;
pub mod experiments;
pub mod limit;
pub mod packet;

pub use estimate::{wigner_estimate, WignerAccumulator, WignerEstimate};
pub use limit::{GaussianPacket, LimitSolution, Side, W0Profile};
pub use packet::{sample_gibbs, sample_initial, Envelope, WavePacketSpec};
