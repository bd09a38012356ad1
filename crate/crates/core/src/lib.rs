//! Secure slot allocation for energy-harvesting sensors.
//!
//! A set of battery-powered, energy-harvesting sensors shares the data slots
//! of each frame toward one destination while an eavesdropper listens. Each
//! sensor transmits at a fixed rate with the least power that keeps the
//! packet decodable at the destination and secret from the eavesdropper, and
//! the destination assigns slots to maximize the number of secure packets
//! without violating any sensor's energy causality.
//!
//! Modules:
//! - [`channel`]: block-fading gains, secrecy capacity, minimum secure power
//! - [`energy`]: harvest schedule, battery recursion, prefix quotas
//! - [`allocator`]: exact slot assignment, exhaustive oracle, baselines
//! - [`sim`]: frame-by-frame Monte Carlo runs and parameter sweeps
//! - [`cli`]: config loading, commands and CSV output

pub mod allocator;
pub mod channel;
pub mod cli;
pub mod config;
pub mod energy;
mod flow;
pub mod rng;
pub mod sim;

pub use allocator::{Assignment, FrameProblem};
pub use channel::{ChannelRealization, LinkModel};
pub use config::{NetworkConfig, Scheme};
pub use energy::{EnergyState, HarvestSchedule};
pub use sim::{SimResult, SweepParam, SweepRow};
