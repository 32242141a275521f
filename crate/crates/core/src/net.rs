//! Threshold-gated recurrent controller.
//!
//! Neurons use the logistic activation without bias. A synapse transmits
//! `w * y` only while its presynaptic output `y` is strictly above the
//! activation threshold. Layers are evaluated in order `input`, `hidden(0)`,
//! `hidden(1)`, ..., `output`; a synapse from an already evaluated layer
//! delivers this step's value, every other synapse (lateral, backward, self)
//! delivers the value from the previous step.

use serde::{Deserialize, Serialize};

use crate::env::{Action, BitState};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Input,
    Hidden(u32),
    Output,
}

impl Layer {
    /// Evaluation rank; lower ranks are evaluated first within a step.
    pub fn rank(&self) -> u64 {
        match *self {
            Layer::Input => 0,
            Layer::Hidden(h) => 1 + h as u64,
            Layer::Output => u64::MAX,
        }
    }

    pub fn is_hidden(&self) -> bool {
        matches!(self, Layer::Hidden(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neuron {
    pub id: u32,
    pub layer: Layer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    pub pre: u32,
    pub post: u32,
    pub w: f64,
}

impl Synapse {
    fn key(&self) -> (u32, u32) {
        (self.post, self.pre)
    }
}

/// Network topology and weights. Neurons are kept sorted by id and synapses
/// by `(post, pre)`, which fixes the floating-point summation order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct Network {
    threshold: f64,
    neurons: Vec<Neuron>,
    synapses: Vec<Synapse>,
}

#[derive(Deserialize)]
struct RawNetwork {
    #[serde(default = "default_threshold")]
    threshold: f64,
    neurons: Vec<Neuron>,
    synapses: Vec<Synapse>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        Network::new(raw.threshold, raw.neurons, raw.synapses)
    }
}

impl Network {
    pub fn new(threshold: f64, mut neurons: Vec<Neuron>, mut synapses: Vec<Synapse>) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::invalid("network", "threshold", "must be finite"));
        }
        neurons.sort_by_key(|n| n.id);
        if let Some(w) = neurons.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::invalid("network", "neurons", format!("duplicate neuron id {}", w[0].id)));
        }
        let inputs = neurons.iter().filter(|n| n.layer == Layer::Input).count();
        let outputs = neurons.iter().filter(|n| n.layer == Layer::Output).count();
        if inputs == 0 || inputs > crate::env::MAX_BITS as usize {
            return Err(Error::invalid("network", "neurons", format!("needs 1..=64 input neurons, found {inputs}")));
        }
        if outputs != 2 * inputs {
            return Err(Error::invalid(
                "network",
                "neurons",
                format!("{inputs} inputs require {} outputs, found {outputs}", 2 * inputs),
            ));
        }
        synapses.sort_by_key(Synapse::key);
        let net = Network {
            threshold,
            neurons,
            synapses,
        };
        for (i, s) in net.synapses.iter().enumerate() {
            let field = format!("synapses[{i}]");
            if !s.w.is_finite() {
                return Err(Error::invalid("network", field, "weight must be finite"));
            }
            if net.position(s.pre).is_none() {
                return Err(Error::invalid("network", field, format!("unknown pre neuron {}", s.pre)));
            }
            match net.position(s.post) {
                None => return Err(Error::invalid("network", field, format!("unknown post neuron {}", s.post))),
                Some(p) if net.neurons[p].layer == Layer::Input => {
                    return Err(Error::invalid("network", field, format!("targets input neuron {}", s.post)))
                }
                _ => {}
            }
            if i > 0 && net.synapses[i - 1].key() == s.key() {
                return Err(Error::invalid("network", field, format!("duplicate synapse {} -> {}", s.pre, s.post)));
            }
        }
        Ok(net)
    }

    /// Input and output layers only: ids `0..n_env` are inputs and
    /// `n_env..3 n_env` outputs, so output `k` encodes action index `k`.
    pub fn with_io(n_env: u32, threshold: f64) -> Self {
        let n = n_env;
        let neurons = (0..n)
            .map(|id| Neuron { id, layer: Layer::Input })
            .chain((n..3 * n).map(|id| Neuron { id, layer: Layer::Output }))
            .collect();
        Network::new(threshold, neurons, Vec::new()).expect("well-formed io layers")
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn synapses(&self) -> &[Synapse] {
        &self.synapses
    }

    pub fn neuron_count(&self) -> usize {
        self.neurons.len()
    }

    pub fn synapse_count(&self) -> usize {
        self.synapses.len()
    }

    /// Index of neuron `id` in [`Network::neurons`], which is also its slot
    /// in a [`NetworkState`].
    pub fn position(&self, id: u32) -> Option<usize> {
        self.neurons.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn layer_of(&self, id: u32) -> Option<Layer> {
        self.position(id).map(|p| self.neurons[p].layer)
    }

    pub fn input_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.ids_in(|l| l == Layer::Input)
    }

    pub fn output_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.ids_in(|l| l == Layer::Output)
    }

    pub fn hidden_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.ids_in(|l| l.is_hidden())
    }

    fn ids_in(&self, f: impl Fn(Layer) -> bool + 'static) -> impl Iterator<Item = u32> + '_ {
        self.neurons.iter().filter(move |n| f(n.layer)).map(|n| n.id)
    }

    pub fn n_env(&self) -> u32 {
        self.input_ids().count() as u32
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_ids().count()
    }

    pub fn has_synapse(&self, pre: u32, post: u32) -> bool {
        self.synapse_index(pre, post).is_ok()
    }

    fn synapse_index(&self, pre: u32, post: u32) -> std::result::Result<usize, usize> {
        self.synapses.binary_search_by_key(&(post, pre), Synapse::key)
    }

    pub fn incoming(&self, id: u32) -> impl Iterator<Item = &Synapse> + '_ {
        let start = self.synapses.partition_point(|s| s.post < id);
        self.synapses[start..].iter().take_while(move |s| s.post == id)
    }

    pub fn outgoing(&self, id: u32) -> impl Iterator<Item = &Synapse> + '_ {
        self.synapses.iter().filter(move |s| s.pre == id)
    }

    /// True when the synapse delivers the presynaptic value from the same
    /// step (pre layer evaluated strictly before post layer).
    pub fn is_forward(&self, s: &Synapse) -> bool {
        match (self.layer_of(s.pre), self.layer_of(s.post)) {
            (Some(a), Some(b)) => a.rank() < b.rank(),
            _ => false,
        }
    }

    /// No delayed synapses at all: the network is a pure function of its
    /// current input.
    pub fn is_feedforward(&self) -> bool {
        self.synapses.iter().all(|s| self.is_forward(s))
    }

    pub fn add_neuron(&mut self, layer: Layer) -> u32 {
        let id = self.neurons.last().map_or(0, |n| n.id + 1);
        self.neurons.push(Neuron { id, layer });
        id
    }

    /// Removes a neuron together with every synapse touching it.
    pub fn remove_neuron(&mut self, id: u32) -> Result<()> {
        let pos = self
            .position(id)
            .ok_or_else(|| Error::Usage(format!("no neuron with id {id}")))?;
        self.neurons.remove(pos);
        self.synapses.retain(|s| s.pre != id && s.post != id);
        Ok(())
    }

    pub fn add_synapse(&mut self, pre: u32, post: u32, w: f64) -> Result<()> {
        if self.position(pre).is_none() {
            return Err(Error::Usage(format!("no neuron with id {pre}")));
        }
        match self.layer_of(post) {
            None => return Err(Error::Usage(format!("no neuron with id {post}"))),
            Some(Layer::Input) => return Err(Error::Usage(format!("synapse may not target input neuron {post}"))),
            _ => {}
        }
        match self.synapse_index(pre, post) {
            Ok(_) => Err(Error::Usage(format!("synapse {pre} -> {post} already exists"))),
            Err(at) => {
                self.synapses.insert(at, Synapse { pre, post, w });
                Ok(())
            }
        }
    }

    pub fn remove_synapse_at(&mut self, index: usize) -> Synapse {
        self.synapses.remove(index)
    }

    pub fn weight_mut(&mut self, pre: u32, post: u32) -> Option<&mut f64> {
        let i = self.synapse_index(pre, post).ok()?;
        Some(&mut self.synapses[i].w)
    }

    pub fn weights_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.synapses.iter_mut().map(|s| &mut s.w)
    }

    pub fn compile(&self) -> CompiledNetwork {
        CompiledNetwork::new(self)
    }
}

/// Logistic function `1 / (1 + e^-x)`.
pub fn activation(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-neuron outputs, indexed by neuron position. Stored as one buffer:
/// the current outputs followed by the previous step's outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    buf: Vec<f64>,
    n: usize,
}

impl NetworkState {
    pub fn zeros(n: usize) -> Self {
        NetworkState { buf: vec![0.0; 2 * n], n }
    }

    pub fn from_parts(curr: &[f64], prev: &[f64]) -> Result<Self> {
        if curr.len() != prev.len() {
            return Err(Error::Dimension("current and previous outputs differ in length".into()));
        }
        let mut buf = curr.to_vec();
        buf.extend_from_slice(prev);
        Ok(NetworkState { buf, n: curr.len() })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn curr(&self) -> &[f64] {
        &self.buf[..self.n]
    }

    pub fn prev(&self) -> &[f64] {
        &self.buf[self.n..]
    }

    /// Appends a slot that mirrors the neuron at `pos`, for a neuron that was
    /// just added at the end of the neuron list.
    pub fn push_copy_of(&mut self, pos: usize) {
        let (c, p) = (self.buf[pos], self.buf[self.n + pos]);
        let mut curr = self.curr().to_vec();
        let mut prev = self.prev().to_vec();
        curr.push(c);
        prev.push(p);
        *self = NetworkState::from_parts(&curr, &prev).expect("equal lengths");
    }
}

/// All outputs zero, so nothing carries over between lifetimes.
pub fn reset_state(net: &Network) -> NetworkState {
    NetworkState::zeros(net.neuron_count())
}

/// Flattened evaluation plan for the hot loop.
#[derive(Clone, Debug)]
pub struct CompiledNetwork {
    n: usize,
    threshold: f64,
    input_pos: Vec<usize>,
    output_pos: Vec<usize>,
    eval_pos: Vec<usize>,
    offsets: Vec<usize>,
    /// Index into the state buffer: `< n` reads this step, `>= n` the
    /// previous step.
    src: Vec<usize>,
    weights: Vec<f64>,
}

impl CompiledNetwork {
    fn new(net: &Network) -> Self {
        let n = net.neuron_count();
        let pos_of = |id: u32| net.position(id).expect("validated synapse endpoint");
        let input_pos = net.input_ids().map(pos_of).collect();
        let output_pos = net.output_ids().map(pos_of).collect();
        let mut eval_pos: Vec<usize> = (0..n).filter(|&p| net.neurons[p].layer != Layer::Input).collect();
        eval_pos.sort_by_key(|&p| (net.neurons[p].layer.rank(), net.neurons[p].id));

        let mut offsets = Vec::with_capacity(eval_pos.len() + 1);
        let mut src = Vec::with_capacity(net.synapse_count());
        let mut weights = Vec::with_capacity(net.synapse_count());
        offsets.push(0);
        for &p in &eval_pos {
            let neuron = net.neurons[p];
            for s in net.incoming(neuron.id) {
                let pre = pos_of(s.pre);
                let same_step = net.neurons[pre].layer.rank() < neuron.layer.rank();
                src.push(if same_step { pre } else { n + pre });
                weights.push(s.w);
            }
            offsets.push(src.len());
        }
        CompiledNetwork {
            n,
            threshold: net.threshold,
            input_pos,
            output_pos,
            eval_pos,
            offsets,
            src,
            weights,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.input_pos.len()
    }

    pub fn neuron_count(&self) -> usize {
        self.n
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Advances `state` by one step in place.
    pub fn step(&self, state: &mut NetworkState, input: BitState) -> Result<()> {
        if input.len() as usize != self.input_pos.len() || state.n != self.n {
            return Err(Error::Dimension(format!(
                "network with {} inputs and {} neurons got a {}-bit input and a {}-neuron state",
                self.input_pos.len(),
                self.n,
                input.len(),
                state.n
            )));
        }
        let n = self.n;
        let buf = &mut state.buf;
        buf.copy_within(0..n, n);
        for (i, &p) in self.input_pos.iter().enumerate() {
            buf[p] = input.get(i as u32) as f64;
        }
        for (k, &p) in self.eval_pos.iter().enumerate() {
            let mut net_input = 0.0;
            for j in self.offsets[k]..self.offsets[k + 1] {
                let y = buf[self.src[j]];
                if y > self.threshold {
                    net_input += self.weights[j] * y;
                }
            }
            buf[p] = activation(net_input);
        }
        Ok(())
    }

    pub fn outputs<'a>(&'a self, state: &'a NetworkState) -> impl Iterator<Item = f64> + 'a {
        self.output_pos.iter().map(move |&p| state.buf[p])
    }

    /// Argmax over the output layer without allocating.
    pub fn select_action(&self, state: &NetworkState) -> Action {
        let mut best = 0;
        let mut best_y = f64::NEG_INFINITY;
        for (k, &p) in self.output_pos.iter().enumerate() {
            let y = state.buf[p];
            if y > best_y {
                best = k;
                best_y = y;
            }
        }
        Action::from_index(best)
    }
}

/// One synchronous network step as a pure function; returns the new state
/// and the output-layer vector (ordered by output neuron id).
pub fn step_network(net: &Network, state: &NetworkState, input: BitState) -> Result<(NetworkState, Vec<f64>)> {
    let compiled = net.compile();
    let mut next = state.clone();
    compiled.step(&mut next, input)?;
    let outputs = compiled.outputs(&next).collect();
    Ok((next, outputs))
}

/// Decodes `argmax` index `i` as bit `i / 2`, value `i % 2`; ties go to the
/// lowest index.
pub fn select_action(outputs: &[f64]) -> Action {
    let mut best = 0;
    for (i, &y) in outputs.iter().enumerate() {
        if y > outputs[best] {
            best = i;
        }
    }
    Action::from_index(best)
}
