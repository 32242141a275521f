//! The hypercube world.
//!
//! The environment state is a vector of `n_env` bits. At every step the agent
//! may set one bit to a target value; a goal is an ordered list of such
//! single-bit changes and pays out when the agent's most recent *effective*
//! actions spell it exactly. After a payout a goal's reward drops to zero and
//! recovers linearly over `t_rec` steps. Optionally, every bit flips on its own
//! with probability `p_stoch` per step.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest state vector supported by [`BitState`].
pub const MAX_BITS: u32 = 64;

/// Environment state vector packed into a word; bit `i` of `bits` is element
/// `i` of the vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitState {
    bits: u64,
    len: u32,
}

impl BitState {
    pub fn zeros(len: u32) -> Self {
        assert!((1..=MAX_BITS).contains(&len), "state length {len} out of range");
        BitState { bits: 0, len }
    }

    /// Builds a state from a packed word, masking bits beyond `len`.
    pub fn from_bits(bits: u64, len: u32) -> Self {
        let mut s = Self::zeros(len);
        s.bits = bits & s.mask();
        s
    }

    pub fn random<R: Rng + ?Sized>(len: u32, rng: &mut R) -> Self {
        Self::from_bits(rng.random::<u64>(), len)
    }

    fn mask(&self) -> u64 {
        if self.len == 64 {
            u64::MAX
        } else {
            (1u64 << self.len) - 1
        }
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, index: u32) -> u8 {
        debug_assert!(index < self.len);
        ((self.bits >> index) & 1) as u8
    }

    pub fn with(mut self, index: u32, value: u8) -> Self {
        debug_assert!(index < self.len);
        if value == 0 {
            self.bits &= !(1u64 << index);
        } else {
            self.bits |= 1u64 << index;
        }
        self
    }

    pub fn flipped(mut self, index: u32) -> Self {
        debug_assert!(index < self.len);
        self.bits ^= 1u64 << index;
        self
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn hamming(&self, other: &BitState) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(|i| self.get(i))
    }
}

/// Renders element 0 first, e.g. `00010000` has bit 3 set.
impl fmt::Display for BitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let len = s.len() as u32;
        if !(1..=MAX_BITS).contains(&len) {
            return Err(Error::Usage(format!(
                "bit string must have 1..={MAX_BITS} characters, got {len}"
            )));
        }
        let mut state = BitState::zeros(len);
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => state = state.with(i as u32, 1),
                other => {
                    return Err(Error::Usage(format!("invalid character {other:?} in bit string")))
                }
            }
        }
        Ok(state)
    }
}

/// Set bit `bit` to `value`. Encoded canonically as `2 * bit + value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u8)", into = "(u32, u8)")]
pub struct Action {
    pub bit: u32,
    pub value: u8,
}

impl Action {
    pub fn new(bit: u32, value: u8) -> Self {
        Action { bit, value: value.min(1) }
    }

    pub fn index(&self) -> usize {
        2 * self.bit as usize + self.value as usize
    }

    pub fn from_index(index: usize) -> Self {
        Action {
            bit: (index / 2) as u32,
            value: (index % 2) as u8,
        }
    }
}

impl From<(u32, u8)> for Action {
    fn from((bit, value): (u32, u8)) -> Self {
        // Out-of-range values are kept so validation can report them.
        Action { bit, value }
    }
}

impl From<Action> for (u32, u8) {
    fn from(a: Action) -> Self {
        (a.bit, a.value)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.bit, self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: u32,
    pub sequence: Vec<Action>,
}

impl Goal {
    pub fn new(id: u32, sequence: Vec<Action>) -> Self {
        Goal { id, sequence }
    }

    /// Number of single-bit changes, `k`.
    pub fn complexity(&self) -> usize {
        self.sequence.len()
    }

    /// Number of distinct bit indices touched, `k'`.
    pub fn distinct_bits(&self) -> usize {
        self.sequence.iter().map(|a| a.bit).collect::<HashSet<_>>().len()
    }

    fn check(&self, n_env: u32, field: &str) -> Result<()> {
        if self.sequence.is_empty() {
            return Err(Error::invalid("environment", format!("{field}.sequence"), "goal must have at least one element"));
        }
        let mut last_value: Vec<Option<u8>> = vec![None; n_env as usize];
        for (j, a) in self.sequence.iter().enumerate() {
            let here = format!("{field}.sequence[{j}]");
            if a.bit >= n_env {
                return Err(Error::invalid("environment", here, format!("bit index {} >= n_env {n_env}", a.bit)));
            }
            if a.value > 1 {
                return Err(Error::invalid("environment", here, format!("target value {} is not 0 or 1", a.value)));
            }
            if j > 0 && self.sequence[j - 1] == *a {
                return Err(Error::invalid("environment", here, "repeats the previous element"));
            }
            let slot = &mut last_value[a.bit as usize];
            if *slot == Some(a.value) {
                return Err(Error::invalid(
                    "environment",
                    here,
                    format!("bit {} set to {} twice without being reset in between", a.bit, a.value),
                ));
            }
            *slot = Some(a.value);
        }
        Ok(())
    }
}

fn default_reward_scale() -> f64 {
    1.0
}

/// Immutable description of one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct EnvironmentSpec {
    pub n_env: u32,
    pub t_rec: u64,
    pub p_stoch: f64,
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    pub goals: Vec<Goal>,
}

#[derive(Deserialize)]
struct RawSpec {
    n_env: u32,
    t_rec: u64,
    p_stoch: f64,
    #[serde(default = "default_reward_scale")]
    reward_scale: f64,
    goals: Vec<Goal>,
}

impl TryFrom<RawSpec> for EnvironmentSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        EnvironmentSpec::new(raw.n_env, raw.t_rec, raw.p_stoch, raw.reward_scale, raw.goals)
    }
}

impl EnvironmentSpec {
    pub fn new(n_env: u32, t_rec: u64, p_stoch: f64, reward_scale: f64, goals: Vec<Goal>) -> Result<Self> {
        let spec = EnvironmentSpec {
            n_env,
            t_rec,
            p_stoch,
            reward_scale,
            goals,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BITS).contains(&self.n_env) {
            return Err(Error::invalid("environment", "n_env", format!("must be in 1..={MAX_BITS}, got {}", self.n_env)));
        }
        if self.t_rec < 1 {
            return Err(Error::invalid("environment", "t_rec", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p_stoch) {
            return Err(Error::invalid("environment", "p_stoch", format!("{} is not a probability", self.p_stoch)));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(Error::invalid("environment", "reward_scale", "must be positive and finite"));
        }
        let mut ids = HashSet::new();
        for (i, g) in self.goals.iter().enumerate() {
            if !ids.insert(g.id) {
                return Err(Error::invalid("environment", format!("goals[{i}].id"), format!("duplicate goal id {}", g.id)));
            }
            g.check(self.n_env, &format!("goals[{i}]"))?;
        }
        Ok(())
    }

    pub fn full_reward(&self, goal: &Goal) -> f64 {
        self.reward_scale * goal.complexity() as f64
    }

    pub fn max_complexity(&self) -> usize {
        self.goals.iter().map(Goal::complexity).max().unwrap_or(0)
    }

    pub fn occupancy(&self) -> f64 {
        occupancy(self)
    }

    pub fn difficulty(&self) -> Result<f64> {
        difficulty(self)
    }
}

/// Sets `action.bit` to `action.value`. The flag reports whether the state
/// actually changed.
pub fn apply_action(state: BitState, action: Action) -> Result<(BitState, bool)> {
    if action.bit >= state.len() {
        return Err(Error::Usage(format!(
            "action bit {} out of range for a {}-bit state",
            action.bit,
            state.len()
        )));
    }
    if state.get(action.bit) == action.value {
        Ok((state, false))
    } else {
        Ok((state.with(action.bit, action.value), true))
    }
}

/// Flips each bit independently with probability `p_stoch`. One draw is made
/// per bit whenever `p_stoch > 0`.
pub fn apply_noise<R: Rng + ?Sized>(state: BitState, p_stoch: f64, rng: &mut R) -> (BitState, Vec<u32>) {
    let mut flipped = Vec::new();
    if p_stoch <= 0.0 {
        return (state, flipped);
    }
    let p = p_stoch.min(1.0);
    let mut out = state;
    for i in 0..state.len() {
        if rng.random_bool(p) {
            out = out.flipped(i);
            flipped.push(i);
        }
    }
    (out, flipped)
}

/// Reward a goal would pay at step `t`, given when it last paid out.
pub fn available_reward(last_reached: Option<u64>, full_reward: f64, t_rec: u64, t: u64) -> f64 {
    match last_reached {
        None => full_reward,
        Some(last) => {
            let elapsed = t.saturating_sub(last) as f64;
            full_reward * (elapsed / t_rec as f64).min(1.0)
        }
    }
}

/// Ids of all goals whose sequence equals the tail of `history`
/// (most recent action last).
pub fn match_achieved_goals(history: &[Action], goals: &[Goal]) -> Vec<u32> {
    goals
        .iter()
        .filter(|g| history.ends_with(&g.sequence))
        .map(|g| g.id)
        .collect()
}

/// Sum over goals of `2^(k - k') * (1 / (2 n_env))^k`.
pub fn occupancy(spec: &EnvironmentSpec) -> f64 {
    let base = 1.0 / (2.0 * spec.n_env as f64);
    spec.goals
        .iter()
        .map(|g| {
            let k = g.complexity() as i32;
            let distinct = g.distinct_bits() as i32;
            2f64.powi(k - distinct) * base.powi(k)
        })
        .sum()
}

pub fn difficulty(spec: &EnvironmentSpec) -> Result<f64> {
    let occ = occupancy(spec);
    if occ > 0.0 {
        Ok(1.0 / occ)
    } else {
        Err(Error::Domain("difficulty is undefined for zero occupancy".into()))
    }
}

/// Most recent effective actions, oldest first, bounded by the longest goal.
#[derive(Clone, Debug)]
pub struct ActionHistory {
    buf: Vec<Action>,
    cap: usize,
}

impl ActionHistory {
    pub fn new(capacity: usize) -> Self {
        ActionHistory {
            buf: Vec::with_capacity(capacity + 1),
            cap: capacity,
        }
    }

    pub fn push(&mut self, action: Action) {
        if self.cap == 0 {
            return;
        }
        if self.buf.len() == self.cap {
            self.buf.remove(0);
        }
        self.buf.push(action);
    }

    pub fn as_slice(&self) -> &[Action] {
        &self.buf
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub effective: bool,
    /// `(goal id, reward collected)` for every goal completed this step.
    pub achieved: Vec<(u32, f64)>,
    pub noise_flips: Vec<u32>,
    pub reward_total: f64,
}

/// Mutable world state for one lifetime.
#[derive(Clone, Debug)]
pub struct EnvRuntime {
    pub state: BitState,
    pub t: u64,
    last_reached: Vec<Option<u64>>,
    history: ActionHistory,
}

impl EnvRuntime {
    pub fn new(spec: &EnvironmentSpec, initial_state: BitState) -> Result<Self> {
        if initial_state.len() != spec.n_env {
            return Err(Error::Dimension(format!(
                "initial state has {} bits, environment has {}",
                initial_state.len(),
                spec.n_env
            )));
        }
        Ok(EnvRuntime {
            state: initial_state,
            t: 0,
            last_reached: vec![None; spec.goals.len()],
            history: ActionHistory::new(spec.max_complexity()),
        })
    }

    pub fn history(&self) -> &[Action] {
        self.history.as_slice()
    }

    /// Step at which the goal at `goal_index` last paid out.
    pub fn last_reached(&self, goal_index: usize) -> Option<u64> {
        self.last_reached[goal_index]
    }

    pub fn available_reward(&self, spec: &EnvironmentSpec, goal_index: usize, t: u64) -> f64 {
        let goal = &spec.goals[goal_index];
        available_reward(self.last_reached[goal_index], spec.full_reward(goal), spec.t_rec, t)
    }

    /// Action, then goal matching and payout, then noise, then the clock.
    pub fn step<R: Rng + ?Sized>(&mut self, spec: &EnvironmentSpec, action: Action, rng: &mut R) -> Result<StepOutcome> {
        let (next, effective) = apply_action(self.state, action)?;
        self.state = next;
        let mut achieved = Vec::new();
        let mut reward_total = 0.0;
        if effective {
            self.history.push(action);
            let history = self.history.as_slice();
            for (i, goal) in spec.goals.iter().enumerate() {
                if history.ends_with(&goal.sequence) {
                    let r = self.available_reward(spec, i, self.t);
                    self.last_reached[i] = Some(self.t);
                    reward_total += r;
                    achieved.push((goal.id, r));
                }
            }
        }
        let (noisy, noise_flips) = apply_noise(self.state, spec.p_stoch, rng);
        self.state = noisy;
        self.t += 1;
        Ok(StepOutcome {
            effective,
            achieved,
            noise_flips,
            reward_total,
        })
    }
}

/// Free-function form of [`EnvRuntime::step`].
pub fn env_step<R: Rng + ?Sized>(
    runtime: &mut EnvRuntime,
    spec: &EnvironmentSpec,
    action: Action,
    rng: &mut R,
) -> Result<StepOutcome> {
    runtime.step(spec, action, rng)
}

/// Parameters of the procedural environment generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub n_env: u32,
    pub root_goals: usize,
    pub min_complexity: usize,
    pub max_complexity: usize,
    /// Probability that a segment of length >= 2 is not split further.
    pub stop_prob: f64,
    pub t_rec: u64,
    pub p_stoch: f64,
    pub reward_scale: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            n_env: 8,
            root_goals: 3,
            min_complexity: 2,
            max_complexity: 6,
            stop_prob: 0.5,
            t_rec: 30,
            p_stoch: 0.0085,
            reward_scale: 1.0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BITS).contains(&self.n_env) {
            return Err(Error::Usage(format!("generator n_env must be in 1..={MAX_BITS}")));
        }
        if self.root_goals < 1 {
            return Err(Error::Usage("generator needs at least one root goal".into()));
        }
        if self.max_complexity < 1 || self.min_complexity < 1 {
            return Err(Error::Usage("goal complexity bounds must be at least 1".into()));
        }
        if self.min_complexity > self.max_complexity {
            return Err(Error::Usage(format!(
                "min_complexity {} exceeds max_complexity {}",
                self.min_complexity, self.max_complexity
            )));
        }
        if !(0.0..=1.0).contains(&self.stop_prob) {
            return Err(Error::Usage("stop_prob must be a probability".into()));
        }
        Ok(())
    }
}

/// Random goal of length `k` that respects per-bit alternation.
fn sample_sequence<R: Rng + ?Sized>(n_env: u32, k: usize, rng: &mut R) -> Vec<Action> {
    let mut last: Vec<Option<u8>> = vec![None; n_env as usize];
    let mut seq = Vec::with_capacity(k);
    for _ in 0..k {
        let bit = rng.random_range(0..n_env);
        let value = match last[bit as usize] {
            Some(v) => 1 - v,
            None => rng.random_range(0..=1u8),
        };
        last[bit as usize] = Some(value);
        seq.push(Action { bit, value });
    }
    seq
}

fn split_into<R: Rng + ?Sized>(segment: &[Action], stop_prob: f64, rng: &mut R, out: &mut Vec<Vec<Action>>) {
    if segment.len() < 2 || rng.random_bool(stop_prob) {
        return;
    }
    let cut = rng.random_range(1..segment.len());
    let (left, right) = segment.split_at(cut);
    out.push(left.to_vec());
    split_into(left, stop_prob, rng, out);
    out.push(right.to_vec());
    split_into(right, stop_prob, rng, out);
}

/// Samples root goals, then recursively splits each into contiguous
/// subgoals. Identical sequences are registered once; ids follow
/// registration order.
pub fn generate_environment<R: Rng + ?Sized>(params: &GeneratorParams, rng: &mut R) -> Result<EnvironmentSpec> {
    params.validate()?;
    let mut sequences: Vec<Vec<Action>> = Vec::new();
    for _ in 0..params.root_goals {
        let k = rng.random_range(params.min_complexity..=params.max_complexity);
        let root = sample_sequence(params.n_env, k, rng);
        let mut parts = vec![root.clone()];
        split_into(&root, params.stop_prob, rng, &mut parts);
        sequences.extend(parts);
    }
    let mut seen = HashSet::new();
    let goals = sequences
        .into_iter()
        .filter(|s| seen.insert(s.clone()))
        .enumerate()
        .map(|(i, s)| Goal::new(i as u32, s))
        .collect();
    EnvironmentSpec::new(params.n_env, params.t_rec, params.p_stoch, params.reward_scale, goals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn st(s: &str) -> BitState {
        s.parse().unwrap()
    }

    fn a(bit: u32, value: u8) -> Action {
        Action::new(bit, value)
    }

    fn spec_with(n_env: u32, goals: Vec<Vec<Action>>) -> EnvironmentSpec {
        let goals = goals.into_iter().enumerate().map(|(i, s)| Goal::new(i as u32, s)).collect();
        EnvironmentSpec::new(n_env, 30, 0.0, 1.0, goals).unwrap()
    }

    #[test]
    fn apply_action_examples() {
        assert_eq!(apply_action(st("00000000"), a(3, 1)).unwrap(), (st("00010000"), true));
        assert_eq!(apply_action(st("00010000"), a(3, 1)).unwrap(), (st("00010000"), false));
        assert_eq!(apply_action(st("11111111"), a(0, 0)).unwrap(), (st("01111111"), true));
        assert!(matches!(apply_action(st("0000"), a(4, 1)), Err(Error::Usage(_))));
    }

    #[test]
    fn noise_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = st("10110010");
        assert_eq!(apply_noise(s, 0.0, &mut rng), (s, vec![]));
        let (inv, flipped) = apply_noise(s, 1.0, &mut rng);
        assert_eq!(inv, st("01001101"));
        assert_eq!(flipped, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn noise_rate_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000u32 / 8;
        let mut flips = 0usize;
        for _ in 0..draws {
            flips += apply_noise(BitState::zeros(8), 0.0085, &mut rng).1.len();
        }
        let frac = flips as f64 / (draws as f64 * 8.0);
        assert!((frac - 0.0085).abs() <= 0.0005, "flip fraction {frac}");
    }

    #[test]
    fn recovery_examples() {
        assert_eq!(available_reward(None, 3.0, 30, 0), 3.0);
        assert_eq!(available_reward(Some(100), 3.0, 30, 115), 1.5);
        assert_eq!(available_reward(Some(100), 3.0, 30, 130), 3.0);
        assert_eq!(available_reward(Some(100), 3.0, 30, 100), 0.0);
        assert_eq!(available_reward(Some(100), 3.0, 30, 500), 3.0);
    }

    #[test]
    fn match_examples() {
        let g = |id, s| Goal::new(id, s);
        assert_eq!(match_achieved_goals(&[a(2, 1)], &[g(0, vec![a(2, 1)])]), vec![0]);
        assert!(match_achieved_goals(&[a(2, 1), a(5, 0)], &[g(0, vec![a(5, 0), a(2, 1)])]).is_empty());
        let goals = [g(10, vec![a(1, 0), a(1, 1)]), g(11, vec![a(1, 1)])];
        assert_eq!(match_achieved_goals(&[a(1, 1), a(1, 0), a(1, 1)], &goals), vec![10, 11]);
    }

    #[test]
    fn occupancy_and_difficulty_examples() {
        let one = spec_with(8, vec![vec![a(3, 1)]]);
        assert_eq!(one.occupancy(), 0.0625);
        assert_eq!(one.difficulty().unwrap(), 16.0);
        let back_and_forth = spec_with(8, vec![vec![a(3, 1), a(3, 0)]]);
        assert_eq!(back_and_forth.occupancy(), 0.0078125);
        assert_eq!(back_and_forth.difficulty().unwrap(), 128.0);
        let empty = spec_with(8, vec![]);
        assert_eq!(empty.occupancy(), 0.0);
        assert!(matches!(empty.difficulty(), Err(Error::Domain(_))));
    }

    #[test]
    fn step_pays_and_recovers() {
        let spec = spec_with(8, vec![vec![a(0, 1)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rt = EnvRuntime::new(&spec, BitState::zeros(8)).unwrap();
        let out = rt.step(&spec, a(0, 1), &mut rng).unwrap();
        assert!(out.effective);
        assert_eq!(out.achieved, vec![(0, 1.0)]);
        assert_eq!(out.reward_total, 1.0);

        // Scripted alternation: reset at t=0, re-achieved at t=2.
        let out = rt.step(&spec, a(0, 0), &mut rng).unwrap();
        assert!(out.effective && out.achieved.is_empty());
        let out = rt.step(&spec, a(0, 1), &mut rng).unwrap();
        assert_eq!(out.achieved, vec![(0, 2.0 / 30.0)]);
        assert_eq!(rt.t, 3);

        let mut rt = EnvRuntime::new(&spec, BitState::zeros(8)).unwrap();
        let out = rt.step(&spec, a(0, 0), &mut rng).unwrap();
        assert!(!out.effective);
        assert!(out.achieved.is_empty());
        assert_eq!(out.reward_total, 0.0);
    }

    #[test]
    fn ineffective_actions_do_not_break_matching() {
        let spec = spec_with(4, vec![vec![a(0, 1), a(1, 1)]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut rt = EnvRuntime::new(&spec, BitState::zeros(4)).unwrap();
        rt.step(&spec, a(0, 1), &mut rng).unwrap();
        rt.step(&spec, a(2, 0), &mut rng).unwrap();
        let out = rt.step(&spec, a(1, 1), &mut rng).unwrap();
        assert_eq!(out.achieved, vec![(0, 2.0)]);
    }

    #[test]
    fn spec_validation() {
        let bad = |goals: Vec<Vec<Action>>| {
            let goals = goals.into_iter().enumerate().map(|(i, s)| Goal::new(i as u32, s)).collect();
            EnvironmentSpec::new(4, 30, 0.0, 1.0, goals)
        };
        assert!(bad(vec![vec![a(4, 1)]]).is_err());
        assert!(bad(vec![vec![a(1, 1), a(1, 1)]]).is_err());
        assert!(bad(vec![vec![a(1, 1), a(2, 0), a(1, 1)]]).is_err());
        assert!(bad(vec![vec![]]).is_err());
        assert!(bad(vec![vec![a(1, 1), a(2, 0), a(1, 0)]]).is_ok());
        assert!(EnvironmentSpec::new(4, 0, 0.0, 1.0, vec![]).is_err());
        assert!(EnvironmentSpec::new(4, 30, 1.5, 1.0, vec![]).is_err());
    }

    #[test]
    fn json_shape_and_field_errors() {
        let spec = spec_with(8, vec![vec![a(3, 1), a(3, 0)], vec![a(5, 0)]]);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""sequence":[[3,1],[3,0]]"#), "{text}");
        let back: EnvironmentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);

        let bad = r#"{"n_env":4,"t_rec":30,"p_stoch":0.0,"goals":[{"id":0,"sequence":[[7,1]]}]}"#;
        let err = serde_json::from_str::<EnvironmentSpec>(bad).unwrap_err().to_string();
        assert!(err.contains("goals[0].sequence[0]"), "{err}");
    }

    #[test]
    fn generator_degenerate_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = GeneratorParams {
            root_goals: 1,
            min_complexity: 1,
            max_complexity: 1,
            ..Default::default()
        };
        let spec = generate_environment(&params, &mut rng).unwrap();
        assert_eq!(spec.goals.len(), 1);
        assert_eq!(spec.goals[0].complexity(), 1);

        let zero = GeneratorParams {
            max_complexity: 0,
            min_complexity: 0,
            ..Default::default()
        };
        assert!(matches!(generate_environment(&zero, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn generator_invariants_and_determinism_over_seeds() {
        let params = GeneratorParams::default();
        for seed in 0..1000 {
            let spec = generate_environment(&params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            spec.validate().unwrap();
            assert!(!spec.goals.is_empty());
            let again = generate_environment(&params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(spec, again);
        }
    }

    #[test]
    fn generator_produces_subgoals() {
        let params = GeneratorParams {
            root_goals: 1,
            min_complexity: 6,
            max_complexity: 6,
            stop_prob: 0.0,
            ..Default::default()
        };
        let spec = generate_environment(&params, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let root = &spec.goals[0].sequence;
        assert_eq!(root.len(), 6);
        // Full binary splitting registers every single-element segment.
        assert!(spec.goals.iter().any(|g| g.complexity() == 1));
        for g in &spec.goals[1..] {
            assert!(root.windows(g.complexity()).any(|w| w == g.sequence.as_slice()));
        }
    }

    fn arb_action(n: u32) -> impl Strategy<Value = Action> {
        (0..n, 0..=1u8).prop_map(|(b, v)| Action::new(b, v))
    }

    proptest! {
        #[test]
        fn apply_action_changes_at_most_one_bit(bits in any::<u64>(), act in arb_action(8)) {
            let s = BitState::from_bits(bits, 8);
            let (next, eff) = apply_action(s, act).unwrap();
            prop_assert!(s.hamming(&next) <= 1);
            prop_assert_eq!(eff, s != next);
            prop_assert_eq!(next.get(act.bit), act.value);
        }

        #[test]
        fn matching_agrees_with_brute_force(
            history in prop::collection::vec(arb_action(3), 0..=10),
            goals in prop::collection::vec(prop::collection::vec(arb_action(3), 1..=4), 0..6),
        ) {
            let goals: Vec<Goal> = goals.into_iter().enumerate().map(|(i, s)| Goal::new(i as u32, s)).collect();
            let mut expected = Vec::new();
            for g in &goals {
                let k = g.sequence.len();
                if k <= history.len() {
                    let offset = history.len() - k;
                    if (0..k).all(|j| history[offset + j] == g.sequence[j]) {
                        expected.push(g.id);
                    }
                }
            }
            prop_assert_eq!(match_achieved_goals(&history, &goals), expected);
        }

        #[test]
        fn reward_is_clamped_and_monotone(last in 0u64..1000, dt in 0u64..200, t_rec in 1u64..100, full in 0.1f64..10.0) {
            let r0 = available_reward(Some(last), full, t_rec, last + dt);
            let r1 = available_reward(Some(last), full, t_rec, last + dt + 1);
            prop_assert!((0.0..=full).contains(&r0));
            prop_assert!(r1 >= r0);
        }

        #[test]
        fn occupancy_is_additive(seed_a in any::<u64>(), seed_b in any::<u64>()) {
            let params = GeneratorParams::default();
            let sa = generate_environment(&params, &mut ChaCha8Rng::seed_from_u64(seed_a)).unwrap();
            let sb = generate_environment(&params, &mut ChaCha8Rng::seed_from_u64(seed_b)).unwrap();
            let mut goals = sa.goals.clone();
            let offset = goals.len() as u32;
            goals.extend(sb.goals.iter().map(|g| Goal::new(g.id + offset, g.sequence.clone())));
            let union = EnvironmentSpec::new(8, 30, 0.0, 1.0, goals).unwrap();
            let sum = sa.occupancy() + sb.occupancy();
            prop_assert!((union.occupancy() - sum).abs() <= 1e-15 * sum.max(1.0));
        }

        #[test]
        fn noise_free_step_is_deterministic(bits in any::<u64>(), act in arb_action(8), s1 in any::<u64>(), s2 in any::<u64>()) {
            let spec = spec_with(8, vec![vec![Action::new(0, 1)], vec![Action::new(2, 1), Action::new(0, 1)]]);
            let init = BitState::from_bits(bits, 8);
            let mut r1 = EnvRuntime::new(&spec, init).unwrap();
            let mut r2 = EnvRuntime::new(&spec, init).unwrap();
            let o1 = r1.step(&spec, act, &mut ChaCha8Rng::seed_from_u64(s1)).unwrap();
            let o2 = r2.step(&spec, act, &mut ChaCha8Rng::seed_from_u64(s2)).unwrap();
            prop_assert_eq!(o1, o2);
            prop_assert_eq!(r1.state, r2.state);
        }
    }
}
