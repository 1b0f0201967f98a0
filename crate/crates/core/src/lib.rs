//! Joint transmit power and surface phase design for energy-efficient
//! multi-user MISO downlinks assisted by a low-resolution intelligent surface.

pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod phase;
pub mod power;
pub mod seed;
pub mod solver;
pub mod units;

pub use channel::{pathloss_gain, sample_channels, ChannelSet};
pub use config::{Resolution, SystemConfig};
pub use error::{Error, Result};
pub use model::{PhaseConfig, PowerAllocation, SolveReport};
