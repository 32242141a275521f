use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};

use super::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeuronSpecialization {
    pub neuron: u32,
    pub activity_fraction: f64,
    pub distinct_active_states: usize,
}

/// How often each neuron is active and in how many distinct environment
/// states.
pub fn neuron_specialization(traj: &Trajectory) -> Vec<NeuronSpecialization> {
    let steps = traj.len().max(1) as f64;
    traj.neuron_ids
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let mut active = 0usize;
            let mut states = HashSet::new();
            for (step, y) in traj.steps.iter().zip(traj.neuron_trace(k)) {
                if y > traj.threshold {
                    active += 1;
                    states.insert(step.state);
                }
            }
            NeuronSpecialization {
                neuron: id,
                activity_fraction: active as f64 / steps,
                distinct_active_states: states.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SlowNeuron {
    pub neuron: u32,
    /// Steps between consecutive downward threshold crossings.
    pub intervals: Vec<usize>,
}

/// Neurons whose output falls through the threshold at least twice, with
/// some gap between falls of `min_period` steps or more.
pub fn slow_oscillation_scan(traj: &Trajectory, min_period: usize) -> Result<Vec<SlowNeuron>> {
    if min_period < 2 {
        return Err(Error::Usage(format!("min_period must be at least 2, got {min_period}")));
    }
    let mut found = Vec::new();
    for (k, &id) in traj.neuron_ids.iter().enumerate() {
        let trace: Vec<f64> = traj.neuron_trace(k).collect();
        let crossings: Vec<usize> = (1..trace.len())
            .filter(|&t| trace[t - 1] > traj.threshold && trace[t] <= traj.threshold)
            .collect();
        let intervals: Vec<usize> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        if intervals.iter().any(|&i| i >= min_period) {
            found.push(SlowNeuron { neuron: id, intervals });
        }
    }
    Ok(found)
}

/// Activity flags as a neuron-by-time matrix.
pub fn raster(traj: &Trajectory) -> Vec<Vec<u8>> {
    (0..traj.neuron_ids.len())
        .map(|k| traj.neuron_trace(k).map(|y| (y > traj.threshold) as u8).collect())
        .collect()
}
