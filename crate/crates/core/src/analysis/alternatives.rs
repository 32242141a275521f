//! Alternative actions: one environment state, different choices.
//!
//! A purely reactive controller maps each state to one action, so two visits
//! to a state that end in different actions mean the controller carried
//! something over from its past. How far back the two histories agree gives
//! a lower bound on how much it had to remember.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::env::{Action, BitState};

use super::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlternativeEvent {
    #[serde(serialize_with = "as_bit_string")]
    pub state: BitState,
    pub t1: usize,
    pub a1: Action,
    pub t2: usize,
    pub a2: Action,
    pub stm_lower_bound: usize,
}

fn as_bit_string<S: serde::Serializer>(s: &BitState, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(s)
}

/// `d + 1`, where `d` is how many `(state, action)` pairs immediately
/// preceding `t1` and `t2` agree, walking backwards until they differ or a
/// history runs out.
pub fn stm_depth_lower_bound(traj: &Trajectory, t1: usize, t2: usize) -> usize {
    let steps = &traj.steps;
    let limit = t1.min(t2);
    let mut d = 0;
    while d < limit {
        let (x, y) = (&steps[t1 - 1 - d], &steps[t2 - 1 - d]);
        if x.state != y.state || x.action != y.action {
            break;
        }
        d += 1;
    }
    d + 1
}

/// One event per `(state, a1, a2)` triple, taken at its earliest `(t1, t2)`,
/// in time order.
pub fn detect_alternatives(traj: &Trajectory) -> Vec<AlternativeEvent> {
    let mut visits: HashMap<BitState, Vec<usize>> = HashMap::new();
    for (t, s) in traj.steps.iter().enumerate() {
        visits.entry(s.state).or_default().push(t);
    }
    let mut seen = HashSet::new();
    let mut events = Vec::new();
    for ts in visits.values() {
        for (i, &t1) in ts.iter().enumerate() {
            let a1 = traj.steps[t1].action;
            for &t2 in &ts[i + 1..] {
                let a2 = traj.steps[t2].action;
                if a1 != a2 && seen.insert((traj.steps[t1].state, a1, a2)) {
                    events.push(AlternativeEvent {
                        state: traj.steps[t1].state,
                        t1,
                        a1,
                        t2,
                        a2,
                        stm_lower_bound: stm_depth_lower_bound(traj, t1, t2),
                    });
                }
            }
        }
    }
    events.sort_by_key(|e| (e.t1, e.t2));
    events
}
