//! Occupancy sweep: evolution across environment density bands, with and
//! without stochastic bit flips.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{generate_environment, EnvironmentSpec, GeneratorParams};
use crate::error::{Error, Result};
use crate::evo::{evolve, EvoParams};
use crate::harness::seeds::{Purpose, SeedStreams};

use super::stats::{welch_t_test, WelchTest};

/// Environments are drawn from `generator` until their occupancy falls in
/// `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub generator: GeneratorParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub bands: Vec<Band>,
    pub envs_per_band: usize,
    pub runs_per_env: usize,
    /// Noise probabilities to compare; the first is the reference for the
    /// t-tests.
    pub conditions: Vec<f64>,
    pub evo: EvoParams,
    pub retry_budget: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let dense = GeneratorParams {
            root_goals: 6,
            min_complexity: 1,
            max_complexity: 3,
            ..Default::default()
        };
        let sparse = GeneratorParams {
            root_goals: 2,
            min_complexity: 4,
            max_complexity: 6,
            ..Default::default()
        };
        SweepConfig {
            bands: vec![
                Band {
                    label: "sparse".into(),
                    lo: 5e-4,
                    hi: 5e-3,
                    generator: sparse,
                },
                Band {
                    label: "dense".into(),
                    lo: 0.05,
                    hi: 0.5,
                    generator: dense,
                },
            ],
            envs_per_band: 5,
            runs_per_env: 1,
            conditions: vec![0.0, 0.0085],
            evo: EvoParams {
                population_size: 50,
                generations: 300,
                ..Default::default()
            },
            retry_budget: 10_000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::invalid("sweep config", "bands", "at least one band is required"));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if b.lo.is_nan() || b.hi.is_nan() || b.lo > b.hi {
                return Err(Error::invalid("sweep config", format!("bands[{i}]"), "lo must not exceed hi"));
            }
            b.generator.validate()?;
        }
        if self.envs_per_band == 0 || self.runs_per_env == 0 {
            return Err(Error::invalid("sweep config", "envs_per_band", "environment and run counts must be positive"));
        }
        if self.conditions.is_empty() || self.conditions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("sweep config", "conditions", "need at least one noise probability in [0, 1]"));
        }
        self.evo.validate()
    }
}

/// Outcome of one evolutionary run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub band: usize,
    pub env: usize,
    pub run: usize,
    pub p_stoch: f64,
    pub occupancy: f64,
    pub evo_seed: u64,
    pub final_mean_fitness: f64,
    pub champion_fitness: f64,
}

/// Aggregate over one `(band, condition)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub band: String,
    pub lo: f64,
    pub hi: f64,
    pub p_stoch: f64,
    pub n: usize,
    pub mean_occupancy: f64,
    pub mean_final_mean_fitness: f64,
    pub mean_champion_fitness: f64,
    /// Champion fitness of this condition against the reference condition.
    pub vs_reference: Option<WelchTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResults {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
    pub environments: Vec<(usize, EnvironmentSpec)>,
    /// Bands the generator could not hit within the retry budget.
    pub skipped: Vec<String>,
}

impl SweepResults {
    pub fn champion_samples(&self, band: usize, p_stoch: f64) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.band == band && c.p_stoch == p_stoch)
            .map(|c| c.champion_fitness)
            .collect()
    }
}

fn sample_band(band_index: usize, band: &Band, env_index: usize, budget: usize, streams: &SeedStreams) -> Option<EnvironmentSpec> {
    let mut rng = streams.stream(Purpose::EnvGen, band_index as u64, env_index as u64);
    (0..budget).find_map(|_| {
        let spec = generate_environment(&band.generator, &mut rng).ok()?;
        let occ = spec.occupancy();
        (band.lo <= occ && occ <= band.hi).then_some(spec)
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs every `(band, environment, run, condition)` evolution. All
/// conditions of a given `(band, environment, run)` share the environment
/// and the evolutionary seed.
pub fn run_sweep(config: &SweepConfig, workers: usize) -> Result<SweepResults> {
    config.validate()?;
    let streams = SeedStreams::new(config.seed);
    let mut skipped = Vec::new();
    let mut environments = Vec::new();
    for (b, band) in config.bands.iter().enumerate() {
        let envs: Option<Vec<EnvironmentSpec>> = (0..config.envs_per_band)
            .map(|e| sample_band(b, band, e, config.retry_budget, &streams))
            .collect();
        match envs {
            Some(envs) => environments.extend(envs.into_iter().map(|s| (b, s))),
            None => skipped.push(format!(
                "band {} [{}, {}]: no environment within {} attempts",
                band.label, band.lo, band.hi, config.retry_budget
            )),
        }
    }

    struct Job {
        band: usize,
        env: usize,
        run: usize,
        spec: EnvironmentSpec,
        evo: EvoParams,
    }
    let mut jobs = Vec::new();
    let mut env_counter = vec![0usize; config.bands.len()];
    for (b, spec) in &environments {
        let e = env_counter[*b];
        env_counter[*b] += 1;
        for run in 0..config.runs_per_env {
            let seed = streams.derive_seed(Purpose::SweepCell, *b as u64, ((e as u64) << 32) | run as u64);
            for &p in &config.conditions {
                let mut spec = spec.clone();
                spec.p_stoch = p;
                jobs.push(Job {
                    band: *b,
                    env: e,
                    run,
                    spec,
                    evo: EvoParams { seed, ..config.evo.clone() },
                });
            }
        }
    }

    let run_job = |job: &Job| -> Result<SweepCell> {
        let history = evolve(&job.spec, &job.evo, 1, |_| Ok(()))?;
        let last = history.last().expect("at least one generation");
        Ok(SweepCell {
            band: job.band,
            env: job.env,
            run: job.run,
            p_stoch: job.spec.p_stoch,
            occupancy: job.spec.occupancy(),
            evo_seed: job.evo.seed,
            final_mean_fitness: last.mean_fitness,
            champion_fitness: last.max_fitness,
        })
    };
    let cells: Vec<SweepCell> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_job).collect::<Result<_>>())?
    } else {
        jobs.iter().map(run_job).collect::<Result<_>>()?
    };

    let mut results = SweepResults {
        rows: Vec::new(),
        cells,
        environments,
        skipped,
    };
    let reference = config.conditions[0];
    for (b, band) in config.bands.iter().enumerate() {
        let ref_samples = results.champion_samples(b, reference);
        if ref_samples.is_empty() {
            continue;
        }
        for &p in &config.conditions {
            let in_cell: Vec<&SweepCell> = results.cells.iter().filter(|c| c.band == b && c.p_stoch == p).collect();
            let champ: Vec<f64> = in_cell.iter().map(|c| c.champion_fitness).collect();
            let vs_reference = if p == reference {
                None
            } else {
                welch_t_test(&champ, &ref_samples).ok()
            };
            results.rows.push(SweepRow {
                band: band.label.clone(),
                lo: band.lo,
                hi: band.hi,
                p_stoch: p,
                n: champ.len(),
                mean_occupancy: mean(&in_cell.iter().map(|c| c.occupancy).collect::<Vec<_>>()),
                mean_final_mean_fitness: mean(&in_cell.iter().map(|c| c.final_mean_fitness).collect::<Vec<_>>()),
                mean_champion_fitness: mean(&champ),
                vs_reference,
            });
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepConfig {
        SweepConfig {
            bands: vec![SweepConfig::default().bands[1].clone()],
            envs_per_band: 1,
            runs_per_env: 1,
            evo: EvoParams {
                population_size: 6,
                generations: 3,
                lifetime: 30,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn minimal_sweep_has_one_row_per_condition() {
        let r = run_sweep(&tiny(), 1).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.cells.len(), 2);
        assert!(r.skipped.is_empty());
        assert_eq!(r.rows[0].p_stoch, 0.0);
        assert_eq!(r.rows[1].p_stoch, 0.0085);
        // A single run per condition is too few for a t-test.
        assert!(r.rows[1].vs_reference.is_none());
        let occ = r.environments[0].1.occupancy();
        assert!((0.05..=0.5).contains(&occ));
    }

    #[test]
    fn unreachable_band_is_skipped() {
        let mut cfg = tiny();
        cfg.bands[0].lo = 10.0;
        cfg.bands[0].hi = 20.0;
        cfg.retry_budget = 50;
        let r = run_sweep(&cfg, 1).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut cfg = tiny();
        cfg.envs_per_band = 2;
        assert_eq!(run_sweep(&cfg, 1).unwrap(), run_sweep(&cfg, 3).unwrap());
    }
}
