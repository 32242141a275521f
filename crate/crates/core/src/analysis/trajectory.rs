use crate::env::{apply_action, Action, BitState, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::evo::{run_lifetime, Genome};
use crate::net::DEFAULT_THRESHOLD;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    /// Environment state sensed before acting.
    pub state: BitState,
    pub action: Action,
    pub effective: bool,
    pub goals: Vec<u32>,
    pub reward: f64,
    pub noise_flips: Vec<u32>,
}

/// Per-step record of one lifetime, plus every neuron's output after each
/// network update (`activity[t][k]` belongs to `neuron_ids[k]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub n_env: u32,
    pub threshold: f64,
    pub neuron_ids: Vec<u32>,
    pub steps: Vec<TrajectoryStep>,
    pub activity: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Behaviour-only trajectory, used for fixtures and for analysing
    /// sequences that did not come from a network.
    pub fn from_behaviour(n_env: u32, states: &[BitState], actions: &[Action]) -> Result<Self> {
        if states.len() != actions.len() {
            return Err(Error::Dimension(format!(
                "{} states but {} actions",
                states.len(),
                actions.len()
            )));
        }
        let steps = states
            .iter()
            .zip(actions)
            .enumerate()
            .map(|(t, (&state, &action))| TrajectoryStep {
                t,
                state,
                action,
                effective: state.get(action.bit) != action.value,
                goals: Vec::new(),
                reward: 0.0,
                noise_flips: Vec::new(),
            })
            .collect();
        Ok(Trajectory {
            n_env,
            threshold: DEFAULT_THRESHOLD,
            neuron_ids: Vec::new(),
            steps,
            activity: vec![Vec::new(); states.len()],
        })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(state, action)` at every step; the unit compared by the cycle and
    /// memory analyses.
    pub fn keys(&self) -> Vec<(BitState, Action)> {
        self.steps.iter().map(|s| (s.state, s.action)).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// Output trace of one neuron over time.
    pub fn neuron_trace(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.activity.iter().map(move |row| row[k])
    }

    /// State after step `t`, reconstructed from the recorded action and
    /// noise flips.
    pub fn successor(&self, t: usize) -> Result<BitState> {
        let step = &self.steps[t];
        let (mut s, _) = apply_action(step.state, step.action)?;
        for &i in &step.noise_flips {
            s = s.flipped(i);
        }
        Ok(s)
    }
}

/// Same dynamics as fitness evaluation, with every step recorded.
pub fn record_trajectory(
    genome: &Genome,
    spec: &EnvironmentSpec,
    steps: usize,
    initial_state: BitState,
    seed: u64,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        n_env: spec.n_env,
        threshold: genome.threshold(),
        neuron_ids: genome.neurons().iter().map(|n| n.id).collect(),
        steps: Vec::with_capacity(steps),
        activity: Vec::with_capacity(steps),
    };
    run_lifetime(genome, spec, steps, initial_state, seed, |step| {
        traj.steps.push(TrajectoryStep {
            t: step.t,
            state: step.state,
            action: step.action,
            effective: step.outcome.effective,
            goals: step.outcome.achieved.iter().map(|&(id, _)| id).collect(),
            reward: step.outcome.reward_total,
            noise_flips: step.outcome.noise_flips.clone(),
        });
        traj.activity.push(step.neuron_outputs.to_vec());
    })?;
    Ok(traj)
}
