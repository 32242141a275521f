//! Behavioural and neural analyses of recorded lifetimes.

pub mod alternatives;
pub mod cycles;
pub mod neural;
pub mod stats;
pub mod sweep;
pub mod trajectory;

pub use alternatives::{detect_alternatives, stm_depth_lower_bound, AlternativeEvent};
pub use cycles::{detect_main_cycle, periodic_suffix, strategy_signature, CycleInfo};
pub use neural::{neuron_specialization, raster, slow_oscillation_scan, NeuronSpecialization, SlowNeuron};
pub use stats::{welch_t_test, WelchTest};
pub use sweep::{run_sweep, Band, SweepConfig, SweepResults};
pub use trajectory::{record_trajectory, Trajectory, TrajectoryStep};
