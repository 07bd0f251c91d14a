//! Single-perturbation extremum seeking for vibrational stabilization of
//! rigid-body systems, with the averaged model used to analyse it.

pub mod averaging;
pub mod commands;
pub mod error;
pub mod escvs;
pub mod plants;
pub mod scenario;
pub mod sim;

pub use error::{EscError, Result};
pub use escvs::{ClosedLoop, EscVsParams};
pub use plants::{KinematicState, Plant};
pub use sim::{simulate, SimOptions, SimState, Trajectory};
