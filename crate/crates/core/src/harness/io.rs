//! On-disk formats: JSON documents and CSV tables.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::analysis::sweep::SweepResults;
use crate::analysis::trajectory::{Trajectory, TrajectoryStep};
use crate::env::{Action, BitState};
use crate::error::{Error, Result};
use crate::evo::EvolutionHistory;
use crate::net::DEFAULT_THRESHOLD;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Which command and seed produced an artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
}

/// A JSON artifact with its provenance attached as an extra field. Loaders
/// ignore the extra field.
#[derive(Serialize)]
pub struct WithProvenance<'a, T: Serialize> {
    #[serde(flatten)]
    pub inner: &'a T,
    pub provenance: &'a Provenance,
}

#[derive(Serialize)]
struct HistoryRow {
    generation: usize,
    mean_fitness: f64,
    max_fitness: f64,
    interneuron_count_mean: f64,
    synapse_count_mean: f64,
}

pub fn write_history_csv(path: &Path, history: &EvolutionHistory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in &history.records {
        w.serialize(HistoryRow {
            generation: r.generation,
            mean_fitness: r.mean_fitness,
            max_fitness: r.max_fitness,
            interneuron_count_mean: r.interneuron_count_mean,
            synapse_count_mean: r.synapse_count_mean,
        })
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Main cycle of one generation's champion, replayed without noise from a
/// fixed start state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyRow {
    pub generation: usize,
    pub champion_fitness: f64,
    pub cycle_start: Option<usize>,
    pub period: Option<usize>,
    /// Rotation-invariant goal sequence of the cycle, `;`-separated.
    pub signature: String,
}

impl StrategyRow {
    pub fn new(generation: usize, champion_fitness: f64, noise_free: &Trajectory) -> Self {
        let cycle = crate::analysis::detect_main_cycle(noise_free);
        StrategyRow {
            generation,
            champion_fitness,
            cycle_start: cycle.as_ref().map(|c| c.start),
            period: cycle.as_ref().map(|c| c.period),
            signature: cycle
                .as_ref()
                .map(|c| join_ids(&crate::analysis::strategy_signature(noise_free, c)))
                .unwrap_or_default(),
        }
    }
}

pub fn write_strategies_csv(path: &Path, rows: &[StrategyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

fn split_ids(field: &str) -> std::result::Result<Vec<u32>, std::num::ParseIntError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(';').map(str::parse).collect()
}

const TRAJECTORY_HEADER: [&str; 8] = [
    "t",
    "state",
    "action_bit",
    "action_value",
    "effective",
    "reward",
    "goals",
    "noise_flips",
];

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err(path))?;
    for s in &traj.steps {
        w.write_record([
            s.t.to_string(),
            s.state.to_string(),
            s.action.bit.to_string(),
            s.action.value.to_string(),
            (s.effective as u8).to_string(),
            s.reward.to_string(),
            join_ids(&s.goals),
            join_ids(&s.noise_flips),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_activity_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header = std::iter::once("t".to_string()).chain(traj.neuron_ids.iter().map(u32::to_string));
    w.write_record(header).map_err(csv_err(path))?;
    for (t, row) in traj.activity.iter().enumerate() {
        let fields = std::iter::once(t.to_string()).chain(row.iter().map(f64::to_string));
        w.write_record(fields).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Neuron-by-time matrix of 0/1 activity flags.
pub fn write_raster_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let header = std::iter::once("neuron".to_string()).chain((0..traj.len()).map(|t| t.to_string()));
    w.write_record(header).map_err(csv_err(path))?;
    for (id, row) in traj.neuron_ids.iter().zip(crate::analysis::raster(traj)) {
        let fields = std::iter::once(id.to_string()).chain(row.iter().map(u8::to_string));
        w.write_record(fields).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn bad_field(path: &Path, line: usize, column: &str, reason: impl std::fmt::Display) -> Error {
    Error::invalid("trajectory", format!("{}: row {line}, column {column}", path.display()), reason.to_string())
}

/// Reads a trajectory table, optionally with its activity table.
pub fn read_trajectory_csv(path: &Path, activity: Option<&Path>) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::invalid(
            "trajectory",
            path.display().to_string(),
            format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        ));
    }
    let mut steps = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let t: usize = field(0).parse().map_err(|e| bad_field(path, line, "t", e))?;
        let state: BitState = field(1).parse().map_err(|e| bad_field(path, line, "state", e))?;
        let bit: u32 = field(2).parse().map_err(|e| bad_field(path, line, "action_bit", e))?;
        let value: u8 = field(3).parse().map_err(|e| bad_field(path, line, "action_value", e))?;
        if bit >= state.len() || value > 1 {
            return Err(bad_field(path, line, "action_bit", "action outside the state space"));
        }
        let effective = match field(4) {
            "0" => false,
            "1" => true,
            other => return Err(bad_field(path, line, "effective", format!("{other:?} is not 0 or 1"))),
        };
        let reward: f64 = field(5).parse().map_err(|e| bad_field(path, line, "reward", e))?;
        let goals = split_ids(field(6)).map_err(|e| bad_field(path, line, "goals", e))?;
        let noise_flips = split_ids(field(7)).map_err(|e| bad_field(path, line, "noise_flips", e))?;
        steps.push(TrajectoryStep {
            t,
            state,
            action: Action { bit, value },
            effective,
            goals,
            reward,
            noise_flips,
        });
    }
    let n_env = steps.first().map_or(1, |s| s.state.len());
    if steps.iter().any(|s| s.state.len() != n_env) {
        return Err(Error::invalid("trajectory", path.display().to_string(), "states differ in length"));
    }
    let mut traj = Trajectory {
        n_env,
        threshold: DEFAULT_THRESHOLD,
        neuron_ids: Vec::new(),
        activity: vec![Vec::new(); steps.len()],
        steps,
    };
    if let Some(apath) = activity {
        let mut r = csv::Reader::from_path(apath).map_err(csv_err(apath))?;
        let header = r.headers().map_err(csv_err(apath))?.clone();
        traj.neuron_ids = header
            .iter()
            .skip(1)
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad_field(apath, 0, "header", e))?;
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err(apath))?;
            let row: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad_field(apath, line, "output", e))?;
            rows.push(row);
        }
        if rows.len() != traj.len() {
            return Err(Error::Dimension(format!(
                "{} has {} rows, trajectory has {}",
                apath.display(),
                rows.len(),
                traj.len()
            )));
        }
        traj.activity = rows;
    }
    Ok(traj)
}

pub fn write_sweep_csv(dir: &Path, results: &SweepResults) -> Result<(PathBuf, PathBuf)> {
    let summary = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&summary).map_err(csv_err(&summary))?;
    w.write_record([
        "band",
        "occupancy_lo",
        "occupancy_hi",
        "p_stoch",
        "n",
        "mean_occupancy",
        "mean_final_mean_fitness",
        "mean_champion_fitness",
        "t_vs_reference",
        "df_vs_reference",
        "p_vs_reference",
    ])
    .map_err(csv_err(&summary))?;
    for row in &results.rows {
        let (t, df, p) = match row.vs_reference {
            Some(w) => (w.t.to_string(), w.df.to_string(), w.p.to_string()),
            None => Default::default(),
        };
        w.write_record([
            row.band.clone(),
            row.lo.to_string(),
            row.hi.to_string(),
            row.p_stoch.to_string(),
            row.n.to_string(),
            row.mean_occupancy.to_string(),
            row.mean_final_mean_fitness.to_string(),
            row.mean_champion_fitness.to_string(),
            t,
            df,
            p,
        ])
        .map_err(csv_err(&summary))?;
    }
    w.flush().map_err(io_err(&summary))?;

    let cells = dir.join("sweep_cells.csv");
    let mut w = csv::Writer::from_path(&cells).map_err(csv_err(&cells))?;
    for c in &results.cells {
        w.serialize(c).map_err(csv_err(&cells))?;
    }
    w.flush().map_err(io_err(&cells))?;
    Ok((summary, cells))
}

/// Plain line-oriented text file.
pub fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
