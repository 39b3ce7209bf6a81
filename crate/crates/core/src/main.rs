use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use urbannav::citygen::MapDocument;
use urbannav::harness::{
    build_scenario, read_trials, run_landmark_study, run_range_study, run_scene_study, simulate, summarize,
    summarize_scenes, trace_approach, trial_seed, write_csv, write_json, write_jsonl, write_trials, Config, TrialMode,
};
use urbannav::scenestim::{replay_scene, ReplayFrame};
use urbannav::Error;

#[derive(Parser)]
#[command(name = "urbannav", version, about = "Limited-information urban navigation simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per cell (approaches per class for scene-replay).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Write JSONL traces.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one city with landmarks and write map.json.
    GenMap,
    /// Run trials of the configured scenario and write trials.csv.
    RunTrial,
    /// Distance driven before getting lost, per compass case.
    RangeStudy,
    /// Success rate and range over strategies, landmark densities and detection rates.
    LandmarkStudy,
    /// Replay a cue log through the scene estimator, or run the simulated approach study.
    SceneReplay {
        /// Cue replay log (JSONL). Without it the simulated study runs.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Summarize a trials.csv.
    Summarize {
        /// Defaults to trials.csv in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct StudyMeta<'a> {
    study: &'a str,
    seed: u64,
    trials_per_cell: usize,
    cells: Vec<String>,
    bucket_m: Option<f64>,
    range_success: Option<f64>,
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.scenario.seed = s;
    }
    if let Some(n) = common.trials {
        cfg.range_study.trials = n;
        cfg.landmark_study.trials = n;
        cfg.scene_study.approaches = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(common: &Common, name: &str) -> PathBuf {
    common.out.join(name)
}

fn gen_map(common: &Common, cfg: &Config) -> Result<()> {
    let sc = build_scenario(&cfg.scenario, cfg.scenario.seed)?;
    let doc = MapDocument::from_network(&sc.net, Some(&sc.landmarks));
    let path = out_path(common, "map.json");
    doc.save(&path)?;
    println!(
        "{}: {} intersections, {} segments, {} landmarks, {:.2} km2",
        path.display(),
        sc.net.nodes.len(),
        sc.net.edges.len(),
        sc.landmarks.len(),
        sc.net.area_km2()
    );
    Ok(())
}

fn run_trials(common: &Common, cfg: &Config) -> Result<()> {
    let n = common.trials.unwrap_or(1);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let seed = trial_seed(cfg.scenario.seed, i);
        let (rec, trace) = simulate(&cfg.scenario, seed, TrialMode::ToGoal, common.trace)?;
        if let Some(t) = trace {
            write_jsonl(&out_path(common, &format!("trace_{i}_vehicle.jsonl")), &t.vehicle)?;
            write_jsonl(&out_path(common, &format!("trace_{i}_belief.jsonl")), &t.belief)?;
            write_jsonl(&out_path(common, &format!("trace_{i}_decisions.jsonl")), &t.decisions)?;
        }
        records.push(rec);
    }
    write_trials(&out_path(common, "trials.csv"), &records)?;
    let s = summarize(&records, cfg.landmark_study.bucket_m, cfg.landmark_study.range_success);
    println!("{}", serde_json::to_string(&s)?);
    Ok(())
}

fn range_study(common: &Common, cfg: &Config) -> Result<()> {
    let table = run_range_study(&cfg.scenario, &cfg.range_study, common.parallel)?;
    write_csv(&out_path(common, "study.csv"), &table.rows)?;
    write_trials(&out_path(common, "trials.csv"), &table.trials.concat())?;
    let cells = cfg
        .range_study
        .compass_2sigma_deg
        .iter()
        .map(|c| c.map_or("none".to_string(), |d| format!("{d}")))
        .collect();
    let meta = StudyMeta {
        study: "range",
        seed: cfg.scenario.seed,
        trials_per_cell: cfg.range_study.trials,
        cells,
        bucket_m: None,
        range_success: None,
    };
    write_json(&out_path(common, "study_meta.json"), &meta)?;
    for r in &table.rows {
        println!(
            "compass {:>5}: lost {}/{} mean {:.0} m",
            r.compass_2sigma_deg.map_or("none".into(), |d| format!("{d}")),
            r.lost,
            r.n,
            r.mean_manhattan_m.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn landmark_study(common: &Common, cfg: &Config) -> Result<()> {
    let study = run_landmark_study(&cfg.scenario, &cfg.landmark_study, common.parallel)?;
    write_csv(&out_path(common, "study.csv"), &study.table.rows)?;
    write_csv(&out_path(common, "buckets.csv"), &study.buckets)?;
    write_trials(&out_path(common, "trials.csv"), &study.table.trials.concat())?;
    let cells = study
        .table
        .rows
        .iter()
        .map(|r| format!("{}/{}/{}", r.strategy.name(), r.density_per_km2, r.detection_rate))
        .collect();
    let meta = StudyMeta {
        study: "landmark",
        seed: cfg.scenario.seed,
        trials_per_cell: cfg.landmark_study.trials,
        cells,
        bucket_m: Some(cfg.landmark_study.bucket_m),
        range_success: Some(cfg.landmark_study.range_success),
    };
    write_json(&out_path(common, "study_meta.json"), &meta)?;
    for r in &study.table.rows {
        println!(
            "{:<20} density {:>5} rate {:>3}: success {:.3} range {}",
            r.strategy.name(),
            r.density_per_km2,
            r.detection_rate,
            r.success_rate.unwrap_or(f64::NAN),
            r.range_m.map_or("-".into(), |m| format!("{m:.0} m"))
        );
    }
    Ok(())
}

fn scene_replay(common: &Common, cfg: &Config, input: Option<&Path>) -> Result<()> {
    if let Some(path) = input {
        let frames: Vec<ReplayFrame> =
            urbannav::harness::read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
        let trace = replay_scene(&frames, cfg.scene_study.scene)?;
        write_jsonl(&out_path(common, "scene_trace.jsonl"), &trace)?;
        if let Some(last) = trace.last() {
            println!("{}", serde_json::to_string(last)?);
        }
        return Ok(());
    }
    let records = run_scene_study(&cfg.scene_study, cfg.scenario.seed, common.parallel)?;
    write_csv(&out_path(common, "approaches.csv"), &records)?;
    let summary = summarize_scenes(&records);
    write_csv(&out_path(common, "study.csv"), &[summary])?;
    if common.trace {
        let (_, trace) = trace_approach(&cfg.scene_study, cfg.scenario.seed, 0)?;
        write_jsonl(&out_path(common, "scene_trace.jsonl"), &trace)?;
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn summarize_file(common: &Common, cfg: &Config, input: Option<&Path>) -> Result<()> {
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| out_path(common, "trials.csv"));
    let records = read_trials(&path).with_context(|| format!("reading {}", path.display()))?;
    let s = summarize(&records, cfg.landmark_study.bucket_m, cfg.landmark_study.range_success);
    write_json(&out_path(common, "summary.json"), &s)?;
    println!("{}", serde_json::to_string(&s)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    let cfg = load_config(common)?;
    if common.parallel == 0 {
        return Err(Error::Config("--parallel must be at least 1".into()).into());
    }
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    match &cli.command {
        Command::GenMap => gen_map(common, &cfg),
        Command::RunTrial => run_trials(common, &cfg),
        Command::RangeStudy => range_study(common, &cfg),
        Command::LandmarkStudy => landmark_study(common, &cfg),
        Command::SceneReplay { input } => scene_replay(common, &cfg, input.as_deref()),
        Command::Summarize { input } => summarize_file(common, &cfg, input.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_) | Error::Json(_))));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
