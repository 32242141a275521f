use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::SweepConfig;
use crate::env::{EnvironmentSpec, GeneratorParams};
use crate::error::Result;
use crate::evo::EvoParams;

use super::io::read_json;
use super::seeds::{Purpose, SeedStreams};

/// Where `evolve` gets its world from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvSource {
    Path(PathBuf),
    Generate(GeneratorParams),
}

impl Default for EnvSource {
    fn default() -> Self {
        EnvSource::Generate(GeneratorParams::default())
    }
}

impl EnvSource {
    /// Loads or generates the environment; generation draws from the
    /// `EnvGen` stream of `master_seed`.
    pub fn resolve(&self, master_seed: u64) -> Result<EnvironmentSpec> {
        match self {
            EnvSource::Path(p) => read_json(p),
            EnvSource::Generate(params) => {
                let mut rng = SeedStreams::new(master_seed).stream(Purpose::EnvGen, 0, 0);
                crate::env::generate_environment(params, &mut rng)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveConfig {
    pub evo: EvoParams,
    pub env: EnvSource,
    /// Overrides the environment's own noise probability when set.
    pub p_stoch: Option<f64>,
    /// Write `champion_<gen>.json` every this many generations (and for the
    /// last one). Zero writes only the last.
    pub champion_every: usize,
    pub output_dir: PathBuf,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            evo: EvoParams::default(),
            env: EnvSource::default(),
            p_stoch: None,
            champion_every: 100,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepRunConfig {
    #[serde(flatten)]
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl Default for SweepRunConfig {
    fn default() -> Self {
        SweepRunConfig {
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// The published parameter list: 8-bit world, 250-step lifetimes,
    /// 30-step recovery, 0.0085 flip probability, 250 agents for 5000
    /// generations, mutation rates 0.6 / 0.08 / 0.1 / 0.05 / 0.007.
    Paper,
    /// Small sweep that finishes in minutes on one core.
    Desk,
}

pub fn paper_evo() -> EvoParams {
    EvoParams {
        population_size: 250,
        generations: 5000,
        lifetime: 250,
        p_weight: 0.6,
        weight_variance: 0.08,
        p_add_synapse: 0.1,
        p_delete_synapse: 0.05,
        p_duplicate: 0.007,
        ..EvoParams::default()
    }
}

pub fn paper_generator() -> GeneratorParams {
    GeneratorParams {
        n_env: 8,
        t_rec: 30,
        p_stoch: 0.0085,
        ..GeneratorParams::default()
    }
}

impl Preset {
    pub fn evolve_config(self) -> EvolveConfig {
        match self {
            Preset::Paper => EvolveConfig {
                evo: paper_evo(),
                env: EnvSource::Generate(paper_generator()),
                ..EvolveConfig::default()
            },
            Preset::Desk => EvolveConfig {
                evo: EvoParams {
                    population_size: 50,
                    generations: 300,
                    ..paper_evo()
                },
                env: EnvSource::Generate(paper_generator()),
                ..EvolveConfig::default()
            },
        }
    }

    pub fn sweep_config(self) -> SweepRunConfig {
        let mut cfg = SweepRunConfig::default();
        if self == Preset::Paper {
            cfg.sweep.envs_per_band = 20;
            cfg.sweep.runs_per_env = 10;
            cfg.sweep.evo = paper_evo();
        }
        cfg
    }
}
