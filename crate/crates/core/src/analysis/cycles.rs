//! Main behavioural cycle: the exactly periodic tail an agent settles into.

use serde::Serialize;

use crate::env::Action;

use super::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleInfo {
    pub start: usize,
    pub period: usize,
    pub actions: Vec<Action>,
    /// Goals completed during one period beginning at `start`, in step order.
    pub goals: Vec<u32>,
}

/// Smallest period `p` (and for it the earliest start `s`) such that
/// `seq[s..]` repeats with period `p` and spans at least two full periods.
pub fn periodic_suffix<T: PartialEq>(seq: &[T]) -> Option<(usize, usize)> {
    let n = seq.len();
    for p in 1..=n / 2 {
        // Earliest start: one past the last position that breaks period p.
        let mut start = 0;
        for i in (0..n - p).rev() {
            if seq[i] != seq[i + p] {
                start = i + 1;
                break;
            }
        }
        if n - start >= 2 * p {
            return Some((start, p));
        }
    }
    None
}

/// Periodicity of the `(state, action)` sequence.
pub fn detect_main_cycle(traj: &Trajectory) -> Option<CycleInfo> {
    let keys = traj.keys();
    let (start, period) = periodic_suffix(&keys)?;
    let window = &traj.steps[start..start + period];
    Some(CycleInfo {
        start,
        period,
        actions: window.iter().map(|s| s.action).collect(),
        goals: window.iter().flat_map(|s| s.goals.iter().copied()).collect(),
    })
}

/// Lexicographically smallest rotation of the goals completed over one
/// period, so one cycle gets one label regardless of entry phase.
pub fn strategy_signature(_traj: &Trajectory, cycle: &CycleInfo) -> Vec<u32> {
    let g = &cycle.goals;
    (0..g.len())
        .map(|r| {
            let mut rot = g[r..].to_vec();
            rot.extend_from_slice(&g[..r]);
            rot
        })
        .min()
        .unwrap_or_default()
}
