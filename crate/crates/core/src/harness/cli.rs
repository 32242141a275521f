//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    detect_alternatives, detect_main_cycle, neuron_specialization, record_trajectory, run_sweep,
    slow_oscillation_scan, strategy_signature, AlternativeEvent, CycleInfo, NeuronSpecialization, SlowNeuron,
    Trajectory,
};
use crate::env::{generate_environment, BitState, EnvironmentSpec, GeneratorParams};
use crate::error::{Error, Result};
use crate::evo::{evolve, Genome};

use super::config::{EnvSource, EvolveConfig, Preset, SweepRunConfig};
use super::io::{
    ensure_dir, read_json, read_trajectory_csv, write_activity_csv, write_history_csv, write_json,
    write_raster_csv, write_strategies_csv, write_sweep_csv, write_trajectory_csv, Provenance, StrategyRow,
    WithProvenance,
};
use super::seeds::{Purpose, SeedStreams};

#[derive(Debug, Parser)]
#[command(name = "stm-evo", version, about = "Evolve recurrent controllers in a hypercube world and analyse their memory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an environment and save it as JSON.
    Genenv(GenenvArgs),
    /// Run an evolutionary experiment.
    Evolve(EvolveArgs),
    /// Record a saved genome's lifetime in a saved environment.
    Replay(ReplayArgs),
    /// Cycle, alternative-action and neural analyses of a lifetime.
    Analyze(AnalyzeArgs),
    /// Fitness across occupancy bands with and without noise.
    Sweep(SweepArgs),
    /// Occupancy and difficulty of a saved environment.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct GenenvArgs {
    /// Generator parameters as JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_env: Option<u32>,
    #[arg(long)]
    pub root_goals: Option<usize>,
    #[arg(long)]
    pub min_complexity: Option<usize>,
    #[arg(long)]
    pub max_complexity: Option<usize>,
    #[arg(long)]
    pub stop_prob: Option<f64>,
    #[arg(long)]
    pub t_rec: Option<u64>,
    #[arg(long)]
    pub p_stoch: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file.
    #[arg(long, default_value = "env.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub lifetime: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Saved environment; otherwise one is generated from the master seed.
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub p_stoch: Option<f64>,
    #[arg(long)]
    pub champion_every: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub genome: PathBuf,
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long, default_value_t = 250)]
    pub steps: usize,
    /// Seeds the start state (unless `--start` is given) and the noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start state as a bit string, leftmost character is bit 0.
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub p_stoch: Option<f64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Recorded trajectory CSV; alternative to `--genome`/`--env`.
    #[arg(long, conflicts_with_all = ["genome", "env"])]
    pub trajectory: Option<PathBuf>,
    /// Activity CSV belonging to `--trajectory`.
    #[arg(long, requires = "trajectory")]
    pub activity: Option<PathBuf>,
    #[arg(long, requires = "env")]
    pub genome: Option<PathBuf>,
    #[arg(long, requires = "genome")]
    pub env: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub p_stoch: Option<f64>,
    /// Shortest activity period reported as a slow oscillation.
    #[arg(long, default_value_t = 10)]
    pub min_period: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub envs_per_band: Option<usize>,
    #[arg(long)]
    pub runs_per_env: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub env: PathBuf,
}

/// Parses `argv` and runs the chosen command.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            e.exit();
        }
        _ => {
            let msg = e.to_string();
            Error::Usage(msg.trim_start_matches("error: ").trim_end().to_string())
        }
    })?;
    match cli.command {
        Command::Genenv(a) => genenv(a),
        Command::Evolve(a) => evolve_cmd(a),
        Command::Replay(a) => replay(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => sweep(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn provenance<T: Serialize>(command: &str, master_seed: u64, config: &T) -> Provenance {
    Provenance {
        command: command.to_string(),
        master_seed,
        config: serde_json::to_value(config).expect("config serializes"),
    }
}

fn genenv(a: GenenvArgs) -> Result<()> {
    let mut params: GeneratorParams = match &a.config {
        Some(p) => read_json(p)?,
        None => GeneratorParams::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { params.$f = v; })* };
    }
    set!(n_env, root_goals, min_complexity, max_complexity, stop_prob, t_rec, p_stoch);
    let mut rng = SeedStreams::new(a.seed).stream(Purpose::EnvGen, 0, 0);
    let spec = generate_environment(&params, &mut rng)?;
    let prov = provenance("genenv", a.seed, &params);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_json(&a.out, &WithProvenance { inner: &spec, provenance: &prov })?;
    println!("wrote {} ({} goals, occupancy {})", a.out.display(), spec.goals.len(), spec.occupancy());
    Ok(())
}

fn evolve_cmd(a: EvolveArgs) -> Result<()> {
    let mut cfg: EvolveConfig = match (&a.config, a.preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(preset)) => preset.evolve_config(),
        (None, None) => EvolveConfig::default(),
    };
    if let (Some(_), Some(preset)) = (&a.config, a.preset) {
        return Err(Error::Usage(format!("--config and --preset {preset:?} are mutually exclusive")));
    }
    if let Some(v) = a.generations {
        cfg.evo.generations = v;
    }
    if let Some(v) = a.population {
        cfg.evo.population_size = v;
    }
    if let Some(v) = a.lifetime {
        cfg.evo.lifetime = v;
    }
    if let Some(v) = a.seed {
        cfg.evo.seed = v;
    }
    if let Some(v) = a.env {
        cfg.env = EnvSource::Path(v);
    }
    if let Some(v) = a.p_stoch {
        cfg.p_stoch = Some(v);
    }
    if let Some(v) = a.champion_every {
        cfg.champion_every = v;
    }
    if let Some(v) = a.out_dir {
        cfg.output_dir = v;
    }
    if a.workers == 0 {
        return Err(Error::Usage("--workers must be at least 1".into()));
    }
    cfg.evo.validate()?;

    let mut spec = cfg.env.resolve(cfg.evo.seed)?;
    if let Some(p) = cfg.p_stoch {
        spec.p_stoch = p;
        spec.validate()?;
    }
    let dir = cfg.output_dir.clone();
    ensure_dir(&dir)?;
    let prov = provenance("evolve", cfg.evo.seed, &cfg);
    write_json(&dir.join("config.resolved.json"), &cfg)?;
    write_json(&dir.join("env.json"), &WithProvenance { inner: &spec, provenance: &prov })?;

    let last_gen = cfg.evo.generations - 1;
    let every = cfg.champion_every;
    let quiet = EnvironmentSpec { p_stoch: 0.0, ..spec.clone() };
    let census_start = BitState::random(spec.n_env, &mut SeedStreams::new(cfg.evo.seed).stream(Purpose::Replay, 0, 0));
    let mut census = Vec::new();
    let history = evolve(&spec, &cfg.evo, a.workers, |rec| {
        let g = rec.generation;
        if g == last_gen || (every > 0 && g % every == 0) {
            let path = dir.join(format!("champion_{g}.json"));
            write_json(&path, &WithProvenance { inner: &rec.champion, provenance: &prov })?;
        }
        let traj = record_trajectory(&rec.champion, &quiet, cfg.evo.lifetime, census_start, 0)?;
        census.push(StrategyRow::new(g, rec.max_fitness, &traj));
        Ok(())
    })?;
    write_history_csv(&dir.join("history.csv"), &history)?;
    write_strategies_csv(&dir.join("strategies.csv"), &census)?;
    let last = history.last().expect("at least one generation");
    println!(
        "generation {}: mean fitness {:.4}, champion fitness {:.4}, results in {}",
        last.generation,
        last.mean_fitness,
        last.max_fitness,
        dir.display()
    );
    Ok(())
}

/// Loads a genome/environment pair and records one lifetime.
fn lifetime(
    genome: &Path,
    env: &Path,
    steps: usize,
    seed: u64,
    start: Option<&str>,
    p_stoch: Option<f64>,
) -> Result<(Genome, EnvironmentSpec, BitState, Trajectory)> {
    let genome: Genome = read_json(genome)?;
    let mut spec: EnvironmentSpec = read_json(env)?;
    if let Some(p) = p_stoch {
        spec.p_stoch = p;
        spec.validate()?;
    }
    let mut rng = SeedStreams::new(seed).stream(Purpose::Replay, 0, 0);
    let s0 = match start {
        Some(s) => s.parse::<BitState>()?,
        None => BitState::random(spec.n_env, &mut rng),
    };
    if s0.len() != spec.n_env {
        return Err(Error::Dimension(format!(
            "start state has {} bits, environment has {}",
            s0.len(),
            spec.n_env
        )));
    }
    let noise_seed = rand::Rng::random::<u64>(&mut rng);
    let traj = record_trajectory(&genome, &spec, steps, s0, noise_seed)?;
    Ok((genome, spec, s0, traj))
}

fn replay(a: ReplayArgs) -> Result<()> {
    let (_, _, s0, traj) = lifetime(&a.genome, &a.env, a.steps, a.seed, a.start.as_deref(), a.p_stoch)?;
    ensure_dir(&a.out_dir)?;
    write_trajectory_csv(&a.out_dir.join("trajectory.csv"), &traj)?;
    write_activity_csv(&a.out_dir.join("activity.csv"), &traj)?;
    write_raster_csv(&a.out_dir.join("raster.csv"), &traj)?;
    write_json(
        &a.out_dir.join("replay.resolved.json"),
        &serde_json::json!({
            "command": "replay",
            "master_seed": a.seed,
            "genome": a.genome,
            "env": a.env,
            "steps": a.steps,
            "start": s0.to_string(),
            "p_stoch": a.p_stoch,
        }),
    )?;
    println!(
        "{} steps from {}, total reward {:.4}, results in {}",
        traj.len(),
        s0,
        traj.total_reward(),
        a.out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CycleReport {
    #[serde(flatten)]
    cycle: CycleInfo,
    signature: Vec<u32>,
}

#[derive(Serialize)]
struct Analysis {
    source: serde_json::Value,
    steps: usize,
    total_reward: f64,
    main_cycle: Option<CycleReport>,
    /// Cycle of the same genome and start state with noise switched off.
    noise_free_cycle: Option<CycleReport>,
    alternatives: Vec<AlternativeEvent>,
    max_stm_lower_bound: usize,
    specialization: Vec<NeuronSpecialization>,
    slow_neurons: Vec<SlowNeuron>,
}

fn cycle_report(traj: &Trajectory) -> Option<CycleReport> {
    detect_main_cycle(traj).map(|cycle| CycleReport {
        signature: strategy_signature(traj, &cycle),
        cycle,
    })
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let (traj, noise_free, source) = match (&a.trajectory, &a.genome, &a.env) {
        (Some(t), _, _) => {
            let traj = read_trajectory_csv(t, a.activity.as_deref())?;
            (traj, None, serde_json::json!({"trajectory": t, "activity": a.activity}))
        }
        (None, Some(g), Some(e)) => {
            let (genome, spec, s0, traj) = lifetime(g, e, a.steps, a.seed, a.start.as_deref(), a.p_stoch)?;
            let quiet = EnvironmentSpec { p_stoch: 0.0, ..spec.clone() };
            let noise_free = record_trajectory(&genome, &quiet, a.steps, s0, 0)?;
            let source = serde_json::json!({
                "genome": g, "env": e, "master_seed": a.seed, "start": s0.to_string(), "p_stoch": spec.p_stoch,
            });
            (traj, Some(noise_free), source)
        }
        _ => return Err(Error::Usage("analyze needs --trajectory or both --genome and --env".into())),
    };
    let alternatives = detect_alternatives(&traj);
    let report = Analysis {
        source,
        steps: traj.len(),
        total_reward: traj.total_reward(),
        main_cycle: cycle_report(&traj),
        noise_free_cycle: noise_free.as_ref().and_then(cycle_report),
        max_stm_lower_bound: alternatives.iter().map(|e| e.stm_lower_bound).max().unwrap_or(0),
        alternatives,
        specialization: neuron_specialization(&traj),
        slow_neurons: slow_oscillation_scan(&traj, a.min_period)?,
    };
    ensure_dir(&a.out_dir)?;
    let path = a.out_dir.join("analysis.json");
    write_json(&path, &report)?;
    println!(
        "{} alternative events (max memory bound {}), main cycle period {}, results in {}",
        report.alternatives.len(),
        report.max_stm_lower_bound,
        report.main_cycle.as_ref().map_or("none".to_string(), |c| c.cycle.period.to_string()),
        path.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    if let (Some(_), Some(preset)) = (&a.config, a.preset) {
        return Err(Error::Usage(format!("--config and --preset {preset:?} are mutually exclusive")));
    }
    let mut cfg: SweepRunConfig = match (&a.config, a.preset) {
        (Some(p), _) => read_json(p)?,
        (None, Some(preset)) => preset.sweep_config(),
        (None, None) => SweepRunConfig::default(),
    };
    if let Some(v) = a.envs_per_band {
        cfg.sweep.envs_per_band = v;
    }
    if let Some(v) = a.runs_per_env {
        cfg.sweep.runs_per_env = v;
    }
    if let Some(v) = a.generations {
        cfg.sweep.evo.generations = v;
    }
    if let Some(v) = a.population {
        cfg.sweep.evo.population_size = v;
    }
    if let Some(v) = a.seed {
        cfg.sweep.seed = v;
    }
    if let Some(v) = a.out_dir {
        cfg.output_dir = v;
    }
    if a.workers == 0 {
        return Err(Error::Usage("--workers must be at least 1".into()));
    }
    let results = run_sweep(&cfg.sweep, a.workers)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_json(&dir.join("config.resolved.json"), &cfg)?;
    let prov = provenance("sweep", cfg.sweep.seed, &cfg);
    write_json(
        &dir.join("environments.json"),
        &WithProvenance { inner: &serde_json::json!({"environments": results.environments}), provenance: &prov },
    )?;
    write_sweep_csv(dir, &results)?;
    for s in &results.skipped {
        eprintln!("skipped {s}");
    }
    for row in &results.rows {
        let vs = row
            .vs_reference
            .map_or(String::new(), |w| format!(", t = {:.3}, p = {:.4}", w.t, w.p));
        println!(
            "{} p_stoch {}: n {}, champion fitness {:.4}{}",
            row.band, row.p_stoch, row.n, row.mean_champion_fitness, vs
        );
    }
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let spec: EnvironmentSpec = read_json(&a.env)?;
    println!("occupancy {}", spec.occupancy());
    println!("difficulty {}", spec.difficulty()?);
    Ok(())
}
