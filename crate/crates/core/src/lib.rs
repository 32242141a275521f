//! Evolution of recurrent neural controllers in a multi-goal hypercube
//! environment, and the tooling used to look for short-term memory in the
//! evolved behaviour.
//!
//! The crate is split along the simulation pipeline:
//!
//! - [`env`]: the `n_env`-bit hypercube world, goals, reward recovery and
//!   stochastic bit flips, plus occupancy/difficulty metrics and a procedural
//!   generator.
//! - [`net`]: threshold-gated logistic networks with delayed recurrent
//!   transmission and argmax action decoding.
//! - [`evo`]: the duplication-based neuroevolution loop.
//! - [`analysis`]: trajectories, behavioural cycles, alternative actions,
//!   memory-depth bounds, neuron-level scans and the Welch t-test.
//! - [`harness`]: seeds, configuration, persistence and the CLI.
//!
//! Every random draw flows through an explicitly passed generator, and the
//! generators used by [`evo::evolve`] are derived from a master seed with a
//! keyed split (see [`harness::seeds`]), so runs are reproducible regardless
//! of the number of worker threads.

pub mod analysis;
pub mod env;
pub mod error;
pub mod evo;
pub mod harness;
pub mod net;

pub use error::{Error, Result};
