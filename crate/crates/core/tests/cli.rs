use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stm_evo::env::{Action, EnvironmentSpec, Goal};
use stm_evo::harness::io::write_json;

fn stm_evo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stm-evo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn metrics_of_single_goal_spec() {
    let dir = tempfile::tempdir().unwrap();
    let spec = EnvironmentSpec::new(8, 30, 0.0, 1.0, vec![Goal::new(0, vec![Action::new(0, 1)])]).unwrap();
    write_json(&dir.path().join("env.json"), &spec).unwrap();
    let text = ok(&stm_evo(dir.path(), &["metrics", "--env", "env.json"]));
    assert_eq!(text, "occupancy 0.0625\ndifficulty 16\n");
}

#[test]
fn paper_preset_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stm_evo(dir.path(), &["evolve", "--preset", "paper", "--generations", "20", "--out-dir", "run"]));
    let run = dir.path().join("run");
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "generation,mean_fitness,max_fitness,interneuron_count_mean,synapse_count_mean");
    assert_eq!(lines.len(), 21);
    let strategies = fs::read_to_string(run.join("strategies.csv")).unwrap();
    assert!(strategies.starts_with("generation,champion_fitness,cycle_start,period,signature\n"));
    assert_eq!(strategies.lines().count(), 21);
    for name in ["config.resolved.json", "env.json", "champion_0.json", "champion_19.json"] {
        assert!(run.join(name).exists(), "{name} missing");
    }
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["evo"]["generations"], 20);
    assert_eq!(resolved["evo"]["population_size"], 250);
    let env: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("env.json")).unwrap()).unwrap();
    assert_eq!(env["provenance"]["command"], "evolve");
    assert_eq!(env["provenance"]["master_seed"], 0);
}

#[test]
fn genenv_replay_analyze_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&stm_evo(d, &["genenv", "--seed", "5", "--out", "env.json"]));
    ok(&stm_evo(
        d,
        &["evolve", "--env", "env.json", "--population", "20", "--generations", "5", "--out-dir", "run"],
    ));
    let replay = |out: &str| {
        ok(&stm_evo(
            d,
            &["replay", "--genome", "run/champion_4.json", "--env", "env.json", "--seed", "3", "--out-dir", out],
        ))
    };
    replay("a");
    replay("b");
    for name in ["trajectory.csv", "activity.csv", "raster.csv"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap(), "{name}");
    }
    assert_eq!(fs::read_to_string(d.join("a/trajectory.csv")).unwrap().lines().count(), 251);

    ok(&stm_evo(d, &["analyze", "--genome", "run/champion_4.json", "--env", "env.json", "--seed", "3", "--out-dir", "x"]));
    ok(&stm_evo(
        d,
        &["analyze", "--trajectory", "a/trajectory.csv", "--activity", "a/activity.csv", "--out-dir", "y"],
    ));
    let x: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("x/analysis.json")).unwrap()).unwrap();
    let y: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("y/analysis.json")).unwrap()).unwrap();
    for key in ["steps", "total_reward", "main_cycle", "alternatives", "specialization", "slow_neurons"] {
        assert_eq!(x[key], y[key], "{key}");
    }
}

#[test]
fn errors_are_distinct_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let unknown = stm_evo(d, &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("unrecognized subcommand"));

    let missing = stm_evo(d, &["metrics", "--env", "absent.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("absent.json"));

    ok(&stm_evo(d, &["genenv", "--out", "env.json"]));
    let text = fs::read_to_string(d.join("env.json")).unwrap();
    fs::write(d.join("cut.json"), &text[..text.len() / 2]).unwrap();
    let truncated = stm_evo(d, &["metrics", "--env", "cut.json"]);
    assert_eq!(truncated.status.code(), Some(4));
    assert!(stderr(&truncated).contains("failed to parse cut.json"));

    fs::write(d.join("bad.json"), r#"{"evo": {"population_size": "many"}}"#).unwrap();
    let malformed = stm_evo(d, &["evolve", "--config", "bad.json"]);
    assert_eq!(malformed.status.code(), Some(4));
    assert!(stderr(&malformed).contains("bad.json"));

    fs::write(d.join("zero.json"), r#"{"evo": {"population_size": 0}}"#).unwrap();
    let invalid = stm_evo(d, &["evolve", "--config", "zero.json"]);
    assert!(!invalid.status.success());
    assert!(stderr(&invalid).contains("population_size"));

    let messages = [&unknown, &missing, &truncated, &malformed, &invalid].map(stderr);
    for i in 0..messages.len() {
        for j in i + 1..messages.len() {
            assert_ne!(messages[i], messages[j]);
        }
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("cfg.json"),
        r#"{"evo": {"population_size": 8, "generations": 9, "lifetime": 20}, "output_dir": "from_file"}"#,
    )
    .unwrap();
    ok(&stm_evo(d, &["evolve", "--config", "cfg.json", "--generations", "3"]));
    let history = fs::read_to_string(d.join("from_file/history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    let resolved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("from_file/config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["evo"]["population_size"], 8);
    assert_eq!(resolved["evo"]["generations"], 3);
}

#[test]
fn small_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sweep.json"),
        r#"{
            "bands": [{"label": "dense", "lo": 0.05, "hi": 0.5,
                       "generator": {"root_goals": 6, "min_complexity": 1, "max_complexity": 3}}],
            "envs_per_band": 2,
            "evo": {"population_size": 6, "generations": 3, "lifetime": 40}
        }"#,
    )
    .unwrap();
    ok(&stm_evo(d, &["sweep", "--config", "sweep.json", "--out-dir", "sw"]));
    let summary = fs::read_to_string(d.join("sw/sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.starts_with("band,"));
    assert_eq!(fs::read_to_string(d.join("sw/sweep_cells.csv")).unwrap().lines().count(), 5);
}
