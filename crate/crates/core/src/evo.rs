//! Neuroevolution by neuron duplication.
//!
//! Genomes are networks (direct encoding). Offspring are mutated copies of
//! roulette-selected parents; there is no crossover. Topology grows through
//! [`duplicate_neuron`] and shrinks through [`delete_connection`] plus
//! [`prune_isolated`].

use std::ops::AddAssign;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{BitState, EnvRuntime, EnvironmentSpec, StepOutcome};
use crate::error::{Error, Result};
use crate::harness::seeds::{Purpose, SeedStreams};
use crate::net::{Layer, Network, NetworkState, DEFAULT_THRESHOLD};

pub type Genome = Network;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoParams {
    pub population_size: usize,
    pub generations: usize,
    /// Agent lifetime in steps.
    pub lifetime: usize,
    /// Per-synapse probability of a weight perturbation.
    pub p_weight: f64,
    /// Variance of the Gaussian weight perturbation.
    pub weight_variance: f64,
    pub p_add_synapse: f64,
    pub p_delete_synapse: f64,
    pub p_duplicate: f64,
    /// New weights are uniform in `[-init_weight_range, init_weight_range]`.
    pub init_weight_range: f64,
    /// Start states per agent per generation; fitness is their mean.
    pub evals_per_agent: usize,
    pub elitism: bool,
    pub seed: u64,
}

impl Default for EvoParams {
    fn default() -> Self {
        EvoParams {
            population_size: 250,
            generations: 5000,
            lifetime: 250,
            p_weight: 0.6,
            weight_variance: 0.08,
            p_add_synapse: 0.1,
            p_delete_synapse: 0.05,
            p_duplicate: 0.007,
            init_weight_range: 1.0,
            evals_per_agent: 1,
            elitism: true,
            seed: 0,
        }
    }
}

impl EvoParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_weight", self.p_weight),
            ("p_add_synapse", self.p_add_synapse),
            ("p_delete_synapse", self.p_delete_synapse),
            ("p_duplicate", self.p_duplicate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("evolution parameters", name, format!("{p} is not a probability")));
            }
        }
        if self.population_size < 2 {
            return Err(Error::invalid("evolution parameters", "population_size", "must be at least 2"));
        }
        if !(self.weight_variance >= 0.0 && self.weight_variance.is_finite()) {
            return Err(Error::invalid("evolution parameters", "weight_variance", "must be a finite non-negative number"));
        }
        if !(self.init_weight_range >= 0.0 && self.init_weight_range.is_finite()) {
            return Err(Error::invalid("evolution parameters", "init_weight_range", "must be a finite non-negative number"));
        }
        if self.evals_per_agent < 1 {
            return Err(Error::invalid("evolution parameters", "evals_per_agent", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationCounts {
    pub weights: usize,
    pub added: usize,
    pub deleted: usize,
    pub duplicated: usize,
    pub pruned: usize,
}

impl AddAssign for MutationCounts {
    fn add_assign(&mut self, o: Self) {
        self.weights += o.weights;
        self.added += o.added;
        self.deleted += o.deleted;
        self.duplicated += o.duplicated;
        self.pruned += o.pruned;
    }
}

fn uniform_weight<R: Rng + ?Sized>(range: f64, rng: &mut R) -> f64 {
    if range == 0.0 {
        0.0
    } else {
        rng.random_range(-range..=range)
    }
}

/// Inputs, outputs and a single interneuron wired from every input and to
/// every output. No input-output shortcuts.
pub fn initial_genome<R: Rng + ?Sized>(n_env: u32, weight_range: f64, rng: &mut R) -> Genome {
    let mut g = Network::with_io(n_env, DEFAULT_THRESHOLD);
    let h = g.add_neuron(Layer::Hidden(0));
    let inputs: Vec<u32> = g.input_ids().collect();
    let outputs: Vec<u32> = g.output_ids().collect();
    for i in inputs {
        g.add_synapse(i, h, uniform_weight(weight_range, rng)).expect("fresh synapse");
    }
    for o in outputs {
        g.add_synapse(h, o, uniform_weight(weight_range, rng)).expect("fresh synapse");
    }
    g
}

pub fn init_population<R: Rng + ?Sized>(params: &EvoParams, n_env: u32, rng: &mut R) -> Vec<Genome> {
    (0..params.population_size)
        .map(|_| initial_genome(n_env, params.init_weight_range, rng))
        .collect()
}

/// Adds `N(0, variance)` noise to each weight with probability `p`.
/// Returns how many weights were perturbed.
pub fn mutate_weights<R: Rng + ?Sized>(genome: &mut Genome, p: f64, variance: f64, rng: &mut R) -> usize {
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite non-negative deviation");
    let mut count = 0;
    for w in genome.weights_mut() {
        if rng.random_bool(p) {
            *w += normal.sample(rng);
            count += 1;
        }
    }
    count
}

/// With probability `p`, connects a uniformly chosen unconnected ordered
/// pair (any pre, non-input post). No-op on a saturated network.
pub fn add_connection<R: Rng + ?Sized>(genome: &mut Genome, p: f64, weight_range: f64, rng: &mut R) -> bool {
    if !rng.random_bool(p) {
        return false;
    }
    let ids: Vec<u32> = genome.neurons().iter().map(|n| n.id).collect();
    let posts: Vec<u32> = genome
        .neurons()
        .iter()
        .filter(|n| n.layer != Layer::Input)
        .map(|n| n.id)
        .collect();
    let free = ids.len() * posts.len() - genome.synapse_count();
    if free == 0 {
        return false;
    }
    let mut k = rng.random_range(0..free);
    for &pre in &ids {
        for &post in &posts {
            if genome.has_synapse(pre, post) {
                continue;
            }
            if k == 0 {
                let w = uniform_weight(weight_range, rng);
                genome.add_synapse(pre, post, w).expect("unconnected pair");
                return true;
            }
            k -= 1;
        }
    }
    unreachable!("free pair count was positive")
}

/// With probability `p`, removes one uniformly chosen synapse, then prunes.
/// Returns `(deleted, pruned neuron count)`.
pub fn delete_connection<R: Rng + ?Sized>(genome: &mut Genome, p: f64, rng: &mut R) -> (bool, usize) {
    if !rng.random_bool(p) || genome.synapse_count() == 0 {
        return (false, 0);
    }
    let i = rng.random_range(0..genome.synapse_count());
    genome.remove_synapse_at(i);
    (true, prune_isolated(genome))
}

/// Duplicates hidden neuron `parent`. The copy receives the parent's
/// incoming weights unchanged; every outgoing weight is halved on the parent
/// and copied, halved, to the child. A self-synapse `w` becomes four
/// synapses of `w / 2`: both self-loops and both cross links.
/// Returns the child's id.
pub fn duplicate_hidden(genome: &mut Genome, parent: u32) -> Result<u32> {
    let layer = genome
        .layer_of(parent)
        .ok_or_else(|| Error::Usage(format!("no neuron with id {parent}")))?;
    if !layer.is_hidden() {
        return Err(Error::Usage(format!("neuron {parent} is not an interneuron")));
    }
    let incoming: Vec<_> = genome.incoming(parent).copied().filter(|s| s.pre != parent).collect();
    let outgoing: Vec<_> = genome.outgoing(parent).copied().filter(|s| s.post != parent).collect();
    let self_w = genome.incoming(parent).find(|s| s.pre == parent).map(|s| s.w);

    let child = genome.add_neuron(layer);
    for s in incoming {
        genome.add_synapse(s.pre, child, s.w)?;
    }
    for s in outgoing {
        let half = s.w / 2.0;
        *genome.weight_mut(parent, s.post).expect("existing synapse") = half;
        genome.add_synapse(child, s.post, half)?;
    }
    if let Some(w) = self_w {
        let half = w / 2.0;
        *genome.weight_mut(parent, parent).expect("existing self-synapse") = half;
        genome.add_synapse(child, child, half)?;
        genome.add_synapse(parent, child, half)?;
        genome.add_synapse(child, parent, half)?;
    }
    Ok(child)
}

/// With probability `p`, duplicates a uniformly chosen interneuron.
/// Returns `(parent, child)` when it fires.
pub fn duplicate_neuron<R: Rng + ?Sized>(genome: &mut Genome, p: f64, rng: &mut R) -> Option<(u32, u32)> {
    if !rng.random_bool(p) {
        return None;
    }
    let hidden: Vec<u32> = genome.hidden_ids().collect();
    if hidden.is_empty() {
        return None;
    }
    let parent = hidden[rng.random_range(0..hidden.len())];
    let child = duplicate_hidden(genome, parent).expect("hidden parent");
    Some((parent, child))
}

/// Removes interneurons with neither incoming nor outgoing synapses.
pub fn prune_isolated(genome: &mut Genome) -> usize {
    let mut removed = 0;
    loop {
        let isolated: Vec<u32> = genome
            .hidden_ids()
            .filter(|&id| genome.incoming(id).next().is_none() && genome.outgoing(id).next().is_none())
            .collect();
        if isolated.is_empty() {
            return removed;
        }
        for id in isolated {
            genome.remove_neuron(id).expect("listed neuron");
            removed += 1;
        }
    }
}

/// Applies every mutation operator in the fixed order: weights, add,
/// delete (with pruning), duplicate, prune.
pub fn mutate<R: Rng + ?Sized>(genome: &mut Genome, params: &EvoParams, rng: &mut R) -> MutationCounts {
    let mut c = MutationCounts {
        weights: mutate_weights(genome, params.p_weight, params.weight_variance, rng),
        ..Default::default()
    };
    c.added = add_connection(genome, params.p_add_synapse, params.init_weight_range, rng) as usize;
    let (deleted, pruned) = delete_connection(genome, params.p_delete_synapse, rng);
    c.deleted = deleted as usize;
    c.pruned = pruned;
    c.duplicated = duplicate_neuron(genome, params.p_duplicate, rng).is_some() as usize;
    c.pruned += prune_isolated(genome);
    c
}

/// What happened at one step of a lifetime, as seen by an observer.
pub struct LifetimeStep<'a> {
    pub t: usize,
    pub state: BitState,
    pub action: crate::env::Action,
    pub outcome: &'a StepOutcome,
    pub neuron_outputs: &'a [f64],
}

/// Runs one lifetime: sense, step the network, act, step the world.
/// Noise draws come from a ChaCha8 stream seeded with `seed`. Returns the
/// total collected reward.
pub fn run_lifetime<F>(
    genome: &Genome,
    spec: &EnvironmentSpec,
    steps: usize,
    initial_state: BitState,
    seed: u64,
    mut observe: F,
) -> Result<f64>
where
    F: FnMut(LifetimeStep<'_>),
{
    if genome.n_env() != spec.n_env {
        return Err(Error::Dimension(format!(
            "genome senses {} bits, environment has {}",
            genome.n_env(),
            spec.n_env
        )));
    }
    let net = genome.compile();
    let mut state = NetworkState::zeros(net.neuron_count());
    let mut world = EnvRuntime::new(spec, initial_state)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for t in 0..steps {
        let sensed = world.state;
        net.step(&mut state, sensed)?;
        let action = net.select_action(&state);
        let outcome = world.step(spec, action, &mut rng)?;
        total += outcome.reward_total;
        observe(LifetimeStep {
            t,
            state: sensed,
            action,
            outcome: &outcome,
            neuron_outputs: state.curr(),
        });
    }
    Ok(total)
}

pub fn evaluate_fitness(
    genome: &Genome,
    spec: &EnvironmentSpec,
    lifetime: usize,
    initial_state: BitState,
    seed: u64,
) -> Result<f64> {
    run_lifetime(genome, spec, lifetime, initial_state, seed, |_| {})
}

pub struct Offspring {
    pub population: Vec<Genome>,
    /// Index in the previous population that each slot descends from.
    pub parents: Vec<usize>,
    pub mutations: MutationCounts,
}

/// Index of the first maximum.
pub fn champion_index(fitnesses: &[f64]) -> usize {
    let mut best = 0;
    for (i, &f) in fitnesses.iter().enumerate() {
        if f > fitnesses[best] {
            best = i;
        }
    }
    best
}

/// Roulette-wheel reproduction with replacement. Fitnesses are shifted so
/// the minimum maps to `1e-6` of the fitness range; equal fitnesses give
/// uniform sampling. Every offspring is a mutated copy of its parent; with
/// elitism slot 0 holds an unmutated copy of the champion.
pub fn select_next_generation<R: Rng + ?Sized>(
    population: &[Genome],
    fitnesses: &[f64],
    params: &EvoParams,
    rng: &mut R,
) -> Result<Offspring> {
    if population.len() != fitnesses.len() {
        return Err(Error::Usage(format!(
            "{} genomes but {} fitness values",
            population.len(),
            fitnesses.len()
        )));
    }
    if population.len() < 2 || params.population_size < 2 {
        return Err(Error::Usage("selection needs a population of at least 2".into()));
    }
    let n = params.population_size;
    let min = fitnesses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let parents: Vec<usize> = if range > 0.0 && range.is_finite() {
        let floor = 1e-6 * range;
        let weights = fitnesses.iter().map(|f| f - min + floor);
        let wheel = WeightedIndex::new(weights).map_err(|e| Error::Domain(format!("selection weights: {e}")))?;
        (0..n).map(|_| wheel.sample(rng)).collect()
    } else {
        (0..n).map(|_| rng.random_range(0..population.len())).collect()
    };

    let mut mutations = MutationCounts::default();
    let mut next: Vec<Genome> = parents
        .iter()
        .map(|&p| {
            let mut child = population[p].clone();
            mutations += mutate(&mut child, params, rng);
            child
        })
        .collect();
    let mut parents = parents;
    if params.elitism {
        let best = champion_index(fitnesses);
        next[0] = population[best].clone();
        parents[0] = best;
    }
    Ok(Offspring {
        population: next,
        parents,
        mutations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub fitnesses: Vec<f64>,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub champion_index: usize,
    pub champion: Genome,
    pub interneuron_count_mean: f64,
    pub synapse_count_mean: f64,
    /// Mutation events that produced this generation (zero for the first).
    pub mutations: MutationCounts,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolutionHistory {
    pub records: Vec<GenerationRecord>,
}

impl EvolutionHistory {
    pub fn last(&self) -> Option<&GenerationRecord> {
        self.records.last()
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n as f64
}

/// Full evolutionary run. Each generation evaluates every agent from the
/// same start state(s) under the same noise seed(s). `workers` only changes
/// how evaluations are scheduled, never the result.
pub fn evolve<F>(spec: &EnvironmentSpec, params: &EvoParams, workers: usize, mut on_generation: F) -> Result<EvolutionHistory>
where
    F: FnMut(&GenerationRecord) -> Result<()>,
{
    params.validate()?;
    spec.validate()?;
    let streams = SeedStreams::new(params.seed);
    let mut population = init_population(params, spec.n_env, &mut streams.stream(Purpose::Init, 0, 0));
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))?,
        )
    } else {
        None
    };

    let mut history = EvolutionHistory::default();
    let mut mutations = MutationCounts::default();
    for generation in 0..params.generations {
        let mut eval_rng = streams.stream(Purpose::Evaluation, generation as u64, 0);
        let starts: Vec<(BitState, u64)> = (0..params.evals_per_agent)
            .map(|_| (BitState::random(spec.n_env, &mut eval_rng), eval_rng.random::<u64>()))
            .collect();
        let fitness_of = |g: &Genome| -> Result<f64> {
            let mut sum = 0.0;
            for &(s0, seed) in &starts {
                sum += evaluate_fitness(g, spec, params.lifetime, s0, seed)?;
            }
            Ok(sum / starts.len() as f64)
        };
        let fitnesses: Vec<f64> = match &pool {
            Some(pool) => pool.install(|| population.par_iter().map(fitness_of).collect::<Result<_>>())?,
            None => population.iter().map(fitness_of).collect::<Result<_>>()?,
        };

        let best = champion_index(&fitnesses);
        let record = GenerationRecord {
            generation,
            mean_fitness: mean(fitnesses.iter().copied()),
            max_fitness: fitnesses[best],
            champion_index: best,
            champion: population[best].clone(),
            interneuron_count_mean: mean(population.iter().map(|g| g.hidden_count() as f64)),
            synapse_count_mean: mean(population.iter().map(|g| g.synapse_count() as f64)),
            mutations,
            fitnesses,
        };
        on_generation(&record)?;

        if generation + 1 < params.generations {
            let mut rng = streams.stream(Purpose::Selection, generation as u64, 0);
            let offspring = select_next_generation(&population, &record.fitnesses, params, &mut rng)?;
            population = offspring.population;
            mutations = offspring.mutations;
        }
        history.records.push(record);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, Goal};
    use crate::net::{reset_state, step_network};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn single_goal_spec() -> EnvironmentSpec {
        EnvironmentSpec::new(8, 30, 0.0, 1.0, vec![Goal::new(0, vec![Action::new(0, 1)])]).unwrap()
    }

    /// Reactive alternator: with bit 7 held at 1 it sets bit 0 when clear
    /// and clears it when set.
    fn alternator() -> Genome {
        let mut g = Network::with_io(8, DEFAULT_THRESHOLD);
        g.add_synapse(7, 9, 5.0).unwrap();
        g.add_synapse(0, 9, -10.0).unwrap();
        g
    }

    #[test]
    fn initial_topology() {
        let pop = init_population(&EvoParams::default(), 8, &mut rng(1));
        assert_eq!(pop.len(), 250);
        for g in &pop {
            assert_eq!(g.neuron_count(), 25);
            assert_eq!(g.synapse_count(), 24);
            assert_eq!(g.hidden_count(), 1);
            let h = g.hidden_ids().next().unwrap();
            for s in g.synapses() {
                assert!(s.pre == h || s.post == h);
                assert!((-1.0..=1.0).contains(&s.w));
            }
        }
        assert_eq!(pop, init_population(&EvoParams::default(), 8, &mut rng(1)));
    }

    #[test]
    fn weight_mutation_edges() {
        let g0 = initial_genome(8, 1.0, &mut rng(2));
        let mut g = g0.clone();
        assert_eq!(mutate_weights(&mut g, 0.0, 0.08, &mut rng(3)), 0);
        assert_eq!(g, g0);
        assert_eq!(mutate_weights(&mut g, 1.0, 0.0, &mut rng(3)), 24);
        assert_eq!(g, g0);
    }

    #[test]
    fn weight_mutation_variance() {
        let base = initial_genome(8, 1.0, &mut rng(4));
        let mut r = rng(5);
        let mut deltas = Vec::with_capacity(100_008);
        while deltas.len() < 100_000 {
            let mut g = base.clone();
            mutate_weights(&mut g, 1.0, 0.08, &mut r);
            deltas.extend(g.synapses().iter().zip(base.synapses()).map(|(a, b)| a.w - b.w));
        }
        let n = deltas.len() as f64;
        let m = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 0.08).abs() <= 0.005, "variance {var}");
    }

    #[test]
    fn add_connection_edges() {
        let g0 = initial_genome(2, 1.0, &mut rng(6));
        let mut g = g0.clone();
        assert!(!add_connection(&mut g, 0.0, 1.0, &mut rng(7)));
        assert_eq!(g, g0);

        // Saturate: every (any, non-input) pair.
        let ids: Vec<u32> = g.neurons().iter().map(|n| n.id).collect();
        for &pre in &ids {
            for &post in &ids {
                if g.layer_of(post) != Some(Layer::Input) && !g.has_synapse(pre, post) {
                    g.add_synapse(pre, post, 0.1).unwrap();
                }
            }
        }
        let full = g.clone();
        assert!(!add_connection(&mut g, 1.0, 1.0, &mut rng(8)));
        assert_eq!(g, full);
    }

    #[test]
    fn added_synapses_never_target_inputs() {
        let mut r = rng(9);
        let mut g = initial_genome(3, 1.0, &mut r);
        let h = g.hidden_ids().next().unwrap();
        duplicate_hidden(&mut g, h).unwrap();
        for _ in 0..10_000 {
            let mut h = g.clone();
            let before = h.synapse_count();
            if add_connection(&mut h, 1.0, 1.0, &mut r) {
                assert_eq!(h.synapse_count(), before + 1);
                let added = h.synapses().iter().find(|s| !g.has_synapse(s.pre, s.post)).unwrap();
                assert_ne!(h.layer_of(added.post), Some(Layer::Input));
            }
        }
    }

    #[test]
    fn delete_connection_cascades() {
        let mut g = Network::with_io(1, DEFAULT_THRESHOLD);
        let h = g.add_neuron(Layer::Hidden(0));
        g.add_synapse(0, h, 0.5).unwrap();
        let g0 = g.clone();
        assert_eq!(delete_connection(&mut g, 0.0, &mut rng(1)), (false, 0));
        assert_eq!(g, g0);
        assert_eq!(delete_connection(&mut g, 1.0, &mut rng(1)), (true, 1));
        assert_eq!(g.synapse_count(), 0);
        assert_eq!(g.hidden_count(), 0);
        assert_eq!(g.neuron_count(), 3);
    }

    #[test]
    fn delete_removes_at_most_one() {
        let mut r = rng(10);
        for _ in 0..200 {
            let mut g = initial_genome(4, 1.0, &mut r);
            let before = g.synapse_count();
            delete_connection(&mut g, 0.5, &mut r);
            assert!(before - g.synapse_count() <= 1);
        }
    }

    #[test]
    fn duplication_halves_outgoing() {
        let mut g = Network::with_io(1, DEFAULT_THRESHOLD);
        let h = g.add_neuron(Layer::Hidden(0));
        g.add_synapse(0, h, 0.6).unwrap();
        g.add_synapse(h, 1, 0.8).unwrap();
        let (in_deg, out_deg) = (g.incoming(h).count(), g.outgoing(h).count());
        let (n0, s0) = (g.neuron_count(), g.synapse_count());
        let c = duplicate_hidden(&mut g, h).unwrap();
        for id in [h, c] {
            let ins: Vec<f64> = g.incoming(id).map(|s| s.w).collect();
            let outs: Vec<f64> = g.outgoing(id).map(|s| s.w).collect();
            assert_eq!(ins, vec![0.6]);
            assert_eq!(outs, vec![0.4]);
        }
        assert_eq!(g.layer_of(c), Some(Layer::Hidden(0)));
        assert_eq!(g.neuron_count(), n0 + 1);
        assert_eq!(g.synapse_count(), s0 + in_deg + out_deg);
    }

    #[test]
    fn duplication_splits_self_loop_four_ways() {
        let mut g = Network::with_io(1, DEFAULT_THRESHOLD);
        let h = g.add_neuron(Layer::Hidden(0));
        g.add_synapse(0, h, 1.0).unwrap();
        g.add_synapse(h, h, 3.0).unwrap();
        g.add_synapse(h, 2, 2.0).unwrap();
        let c = duplicate_hidden(&mut g, h).unwrap();
        for (pre, post) in [(h, h), (c, c), (h, c), (c, h)] {
            assert_eq!(g.synapses().iter().find(|s| s.pre == pre && s.post == post).unwrap().w, 1.5);
        }
        assert!(duplicate_hidden(&mut g, 0).is_err());
    }

    #[test]
    fn duplication_preserves_outputs_on_a_recurrent_fixture() {
        let mut r = rng(11);
        let mut g = initial_genome(3, 1.0, &mut r);
        let h = g.hidden_ids().next().unwrap();
        g.add_synapse(h, h, 0.9).unwrap();
        g.add_synapse(4, h, -0.7).unwrap();
        let mut state = reset_state(&g);
        for _ in 0..5 {
            state = step_network(&g, &state, BitState::random(3, &mut r)).unwrap().0;
        }
        let mut d = g.clone();
        duplicate_hidden(&mut d, h).unwrap();
        let mut ds = state.clone();
        ds.push_copy_of(g.position(h).unwrap());
        for _ in 0..50 {
            let x = BitState::random(3, &mut r);
            let (s1, y1) = step_network(&g, &state, x).unwrap();
            let (s2, y2) = step_network(&d, &ds, x).unwrap();
            for (a, b) in y1.iter().zip(&y2) {
                assert!((a - b).abs() <= 1e-9);
            }
            state = s1;
            ds = s2;
        }
    }

    #[test]
    fn prune_rules() {
        let mut g = initial_genome(2, 1.0, &mut rng(12));
        let g0 = g.clone();
        assert_eq!(prune_isolated(&mut g), 0);
        assert_eq!(g, g0);
        let lonely = g.add_neuron(Layer::Hidden(1));
        assert_eq!(prune_isolated(&mut g), 1);
        assert!(g.position(lonely).is_none());
        // Output neurons without synapses stay.
        let mut bare = Network::with_io(2, DEFAULT_THRESHOLD);
        assert_eq!(prune_isolated(&mut bare), 0);
        assert_eq!(bare.neuron_count(), 6);
    }

    #[test]
    fn silent_genome_scores_zero() {
        let g = Network::with_io(8, DEFAULT_THRESHOLD);
        // All outputs tie, so the agent keeps asking for bit 0 = 0.
        let f = evaluate_fitness(&g, &single_goal_spec(), 250, BitState::zeros(8), 1).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn alternator_fitness_matches_hand_count() {
        let spec = single_goal_spec();
        let start: BitState = "00000001".parse().unwrap();
        // Achieves at t = 0, 2, 4, ...; 125 achievements in 250 steps.
        let f = evaluate_fitness(&alternator(), &spec, 250, start, 0).unwrap();
        let expected = 1.0 + 124.0 * (2.0 / 30.0);
        assert!((f - expected).abs() < 1e-9, "{f} vs {expected}");
        assert_eq!(f.to_bits(), evaluate_fitness(&alternator(), &spec, 250, start, 0).unwrap().to_bits());
        assert!(matches!(
            evaluate_fitness(&alternator(), &spec, 10, BitState::zeros(4), 0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn roulette_with_one_fit_genome() {
        let params = EvoParams {
            population_size: 20,
            p_weight: 0.0,
            p_add_synapse: 0.0,
            p_delete_synapse: 0.0,
            p_duplicate: 0.0,
            ..Default::default()
        };
        let pop = init_population(&params, 3, &mut rng(13));
        let mut fit = vec![0.0; 20];
        fit[7] = 5.0;
        let next = select_next_generation(&pop, &fit, &params, &mut rng(14)).unwrap();
        assert!(next.parents.iter().all(|&p| p == 7));
        assert_eq!(next.population.len(), 20);
    }

    #[test]
    fn roulette_uniform_when_flat() {
        let params = EvoParams {
            population_size: 10,
            ..Default::default()
        };
        let pop = init_population(&params, 2, &mut rng(15));
        let fit = vec![0.0; 10];
        let mut counts = [0usize; 10];
        let mut r = rng(16);
        let mut draws = 0;
        while draws < 10_000 {
            let next = select_next_generation(&pop, &fit, &params, &mut r).unwrap();
            for &p in &next.parents[1..] {
                counts[p] += 1;
                draws += 1;
            }
        }
        let expected = draws as f64 / 10.0;
        let sigma = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn elite_survives_unmutated() {
        let params = EvoParams {
            population_size: 8,
            p_weight: 1.0,
            ..Default::default()
        };
        let pop = init_population(&params, 3, &mut rng(17));
        let fit: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let next = select_next_generation(&pop, &fit, &params, &mut rng(18)).unwrap();
        assert_eq!(next.population[0], pop[7]);
        assert!(select_next_generation(&pop, &fit[..3], &params, &mut rng(18)).is_err());
    }

    #[test]
    fn evolve_bookkeeping() {
        let spec = single_goal_spec();
        let params = EvoParams {
            population_size: 12,
            generations: 1,
            lifetime: 40,
            ..Default::default()
        };
        let h = evolve(&spec, &params, 1, |_| Ok(())).unwrap();
        assert_eq!(h.records.len(), 1);
        let params = EvoParams { generations: 6, ..params };
        let h = evolve(&spec, &params, 1, |_| Ok(())).unwrap();
        for r in &h.records {
            assert_eq!(r.fitnesses.len(), 12);
            let m = r.fitnesses.iter().sum::<f64>() / 12.0;
            assert_eq!(m, r.mean_fitness);
            assert_eq!(r.max_fitness, r.fitnesses[r.champion_index]);
        }
        let again = evolve(&spec, &params, 3, |_| Ok(())).unwrap();
        assert_eq!(h, again);
    }
}
