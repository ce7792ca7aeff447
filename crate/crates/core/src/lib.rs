//! Adiabatic and jumping evolution of driven quantum systems.

pub mod error;
pub mod analysis;
pub mod noise;
pub mod paths;
pub mod qcore;
pub mod runner;
pub mod propagate;
pub mod schedules;

pub use error::{Error, Result};
pub use paths::{AdiabaticPath, EnergyMode};
pub use qcore::{fidelity, HermitianOp, PureState, Unitary, C64};
pub use schedules::{DriveTimeline, GapSchedule, Segment};
