//! Command-line front end shared by the `mwsn` binary and the tests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::metrics::{
    self, compare_methods, write_comparison_csv, CompareConfig, Method, MetricsReport, RecoveryConfig,
};
use crate::rollout::{simulate, Perception};
use crate::scale::{loglog_slope, scale_run, ScaleConfig};
use crate::trainer::{detect_convergence, TrainedPolicy, Trainer};
use crate::vision::{vision_selftest, NoiseConfig};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MWSN_OUT";

#[derive(Debug, Parser)]
#[command(name = "mwsn", version, about = "Multi-agent RL for mobile sensor network coverage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one learner per sensor and write logs, summary and checkpoints.
    Train(TrainArgs),
    /// Run a trained policy greedily, optionally with injected failures.
    Eval(EvalArgs),
    /// Compare methods across seeds and write a comparison table.
    Compare(CompareArgs),
    /// Measure detection and localization accuracy of the camera pipeline.
    VisionSelftest(VisionArgs),
    /// Train at several network sizes and report coverage and timings.
    Scale(ScaleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 25 sensors on 250 x 250 m.
    Desk,
    /// 100 sensors on 500 x 500 m.
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration; without it the preset is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: Preset,
    /// Output root (falls back to the config, then $MWSN_OUT, then ./runs).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run directory name under the output root; defaults to a timestamped name.
    #[arg(long)]
    pub run_name: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub sensors: Option<usize>,
    /// Agents observe camera estimates instead of true positions.
    #[arg(long)]
    pub vision: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of per-agent checkpoints written by `train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sensors failed per recovery trial; 0 skips the recovery scenario.
    #[arg(long, default_value_t = 0)]
    pub failures: usize,
    /// Fail neighbouring sensors together.
    #[arg(long)]
    pub clustered: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated: trained, random, static_grid, greedy.
    #[arg(long, value_delimiter = ',', default_value = "trained,random,static_grid,greedy")]
    pub methods: Vec<String>,
    /// Comma-separated seeds; defaults to the config's seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Also run the failure-recovery protocol for every method.
    #[arg(long)]
    pub recovery: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VisionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Disable every noise source.
    #[arg(long)]
    pub noiseless: bool,
    /// Also sweep occlusion probability 0, 0.1, ..., 0.5.
    #[arg(long)]
    pub occlusion_sweep: bool,
    /// Write one rendered frame as PGM next to the report.
    #[arg(long)]
    pub save_frame: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated sensor counts.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300")]
    pub n: Vec<usize>,
    /// Grow the field with n so density stays that of the configured scenario.
    #[arg(long)]
    pub keep_density: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::VisionSelftest(a) => cmd_vision_selftest(&a),
        Command::Scale(a) => cmd_scale(&a),
    }
}

/// Loads the configuration and applies flag overrides (flags win).
pub fn resolve_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => match c.preset {
            Preset::Desk => RunConfig::desk(),
            Preset::Full => RunConfig::default(),
        },
    };
    if let Some(e) = c.episodes {
        cfg.train.episodes = e;
    }
    if let Some(n) = c.sensors {
        cfg.env.n_sensors = n;
    }
    if c.vision {
        cfg.train.vision = true;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_root(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir(cfg: &RunConfig, c: &Common, kind: &str, seed: u64) -> Result<PathBuf> {
    let name = c.run_name.clone().unwrap_or_else(|| {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        format!("{kind}-seed{seed}-{ts}")
    });
    let dir = output_root(cfg).join(name);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Serialize)]
struct Fault<'a> {
    command: &'a str,
    error: String,
}

/// Runs `body`, leaving `fault.json` in `dir` when it fails.
fn guarded(dir: &Path, command: &str, body: impl FnOnce() -> Result<()>) -> Result<PathBuf> {
    match body() {
        Ok(()) => Ok(dir.to_path_buf()),
        Err(e) => {
            let fault = Fault { command, error: e.to_string() };
            if let Ok(text) = serde_json::to_string_pretty(&fault) {
                let _ = fs::write(dir.join("fault.json"), text);
            }
            Err(e)
        }
    }
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<PathBuf> {
    let mut cfg = resolve_config(&a.common)?;
    cfg.train.seed = a.seed;
    let dir = run_dir(&cfg, &a.common, "train", a.seed)?;
    guarded(&dir, "train", || {
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        let mut t = Trainer::new(cfg.env.clone(), cfg.train.clone(), cfg.reward.clone(), cfg.vision)?;
        let mut logs = BufWriter::new(File::create(dir.join("logs.jsonl"))?);
        let mut timings = csv::Writer::from_path(dir.join("timings.csv"))?;
        timings.write_record(["episode", "steps", "wall_clock_s"])?;
        while t.episode < t.train.episodes {
            let log = t.run_episode()?;
            serde_json::to_writer(&mut logs, log)?;
            logs.write_all(b"\n")?;
            timings.write_record([
                log.episode.to_string(),
                log.steps.to_string(),
                format!("{:.6}", log.wall_clock_s),
            ])?;
        }
        logs.flush()?;
        timings.flush()?;
        t.policy().save(&dir.join("checkpoints"))?;
        let rewards: Vec<f64> = t.logs.iter().map(|l| l.mean_reward).collect();
        let mut report =
            MetricsReport::from_logs("trained", a.seed, &t.logs, cfg.env.n_sensors, cfg.train.convergence_window);
        report.convergence_episode =
            detect_convergence(&rewards, cfg.train.convergence_window, cfg.train.convergence_threshold)
                .map_or(f64::NAN, |e| e as f64);
        write_csv_rows(&dir.join("summary.csv"), &[report])
    })
}

pub fn cmd_eval(a: &EvalArgs) -> Result<PathBuf> {
    let cfg = resolve_config(&a.common)?;
    let arch = cfg.train.learner.architecture(cfg.env.n_actions());
    let mut policy = TrainedPolicy::load(&a.checkpoint, cfg.env.n_sensors, &arch, cfg.train.observation)?;
    let dir = run_dir(&cfg, &a.common, "eval", a.seed)?;
    guarded(&dir, "eval", || {
        let sim = crate::rollout::SimConfig { seed: a.seed, ..cfg.eval };
        let perception = if cfg.train.vision {
            let world = crate::rollout::deploy(&cfg.env, sim.deployment, sim.seed, 0)?;
            Perception::vision(&cfg.env, cfg.vision, &world, crate::seed::stream(a.seed, "camera", 0))?
        } else {
            Perception::GroundTruth
        };
        let logs = simulate(&cfg.env, &cfg.reward, &mut policy, &sim, perception)?;
        let mut report =
            MetricsReport::from_logs("trained", a.seed, &logs, cfg.env.n_sensors, cfg.train.convergence_window);
        if a.failures > 0 {
            let rc = RecoveryConfig { failures: a.failures, clustered: a.clustered, ..cfg.recovery.clone() };
            let rec = metrics::recovery_time(&mut policy, &cfg.env, &cfg.reward, &rc, a.seed)?;
            report.recovery_time_s = rec.median_or_inf();
            write_csv_rows(
                &dir.join("recovery.csv"),
                &rec.times
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (i, t.unwrap_or(f64::INFINITY), rec.pre_coverage[i], rec.drop_coverage[i]))
                    .collect::<Vec<_>>(),
            )?;
        }
        write_csv_rows(&dir.join("metrics.csv"), &[report])
    })
}

pub fn cmd_compare(a: &CompareArgs) -> Result<PathBuf> {
    let cfg = resolve_config(&a.common)?;
    let methods = a.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let seeds = if a.seeds.is_empty() { cfg.seeds.clone() } else { a.seeds.clone() };
    let dir = run_dir(&cfg, &a.common, "compare", seeds.first().copied().unwrap_or(0))?;
    guarded(&dir, "compare", || {
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        let cc = CompareConfig {
            sim: cfg.eval,
            train: cfg.train.clone(),
            recovery: a.recovery.then(|| cfg.recovery.clone()),
            stability_window: cfg.train.convergence_window,
        };
        let reports = compare_methods(&cfg.env, &cfg.reward, &methods, &seeds, &cc)?;
        write_csv_rows(&dir.join("runs.csv"), &reports)?;
        write_comparison_csv(&reports, File::create(dir.join("comparison.csv"))?)
    })
}

pub fn cmd_vision_selftest(a: &VisionArgs) -> Result<PathBuf> {
    let mut cfg = resolve_config(&a.common)?;
    if a.noiseless {
        cfg.vision.noise = NoiseConfig::noiseless();
    }
    let dir = run_dir(&cfg, &a.common, "vision", a.seed)?;
    guarded(&dir, "vision-selftest", || {
        let mut rows = vec![(cfg.vision.noise.occlusion, vision_selftest(&cfg.env, &cfg.vision, a.trials, a.seed)?)];
        if a.occlusion_sweep {
            for k in 0..=5 {
                let mut v = cfg.vision;
                v.noise.occlusion = k as f64 * 0.1;
                rows.push((v.noise.occlusion, vision_selftest(&cfg.env, &v, a.trials, a.seed)?));
            }
        }
        let mut w = csv::Writer::from_path(dir.join("vision.csv"))?;
        w.write_record([
            "occlusion",
            "trials",
            "sensors",
            "detection_rate",
            "false_positives",
            "mean_error_m",
            "p95_error_m",
            "max_error_m",
            "within_1m",
            "homography_rms_px",
            "meters_per_pixel",
            "target_95pct_within_1m",
        ])?;
        for (occ, r) in &rows {
            w.write_record([
                occ.to_string(),
                r.trials.to_string(),
                r.sensors.to_string(),
                format!("{:.6}", r.detection_rate),
                r.false_positives.to_string(),
                format!("{:.6}", r.mean_error_m),
                format!("{:.6}", r.p95_error_m),
                format!("{:.6}", r.max_error_m),
                format!("{:.6}", r.within_1m),
                format!("{:.3e}", r.homography_rms_px),
                r.meters_per_pixel.to_string(),
                if r.within_1m >= 0.95 { "pass" } else { "fail" }.to_string(),
            ])?;
        }
        w.flush()?;
        if a.save_frame {
            let camera = crate::vision::CameraModel::overhead(&cfg.env.field, &cfg.vision)?;
            let world = crate::env::reset(&cfg.env, a.seed)?;
            let frame = crate::vision::render_frame(&world, &camera, a.seed);
            frame.write_pgm(BufWriter::new(File::create(dir.join("frame.pgm"))?))?;
        }
        Ok(())
    })
}

pub fn cmd_scale(a: &ScaleArgs) -> Result<PathBuf> {
    let mut cfg = resolve_config(&a.common)?;
    cfg.train.seed = a.seed;
    let dir = run_dir(&cfg, &a.common, "scale", a.seed)?;
    guarded(&dir, "scale", || {
        let sc = ScaleConfig { sensor_counts: a.n.clone(), keep_density: a.keep_density, ..ScaleConfig::default() };
        let rows = scale_run(&cfg.env, &cfg.train, &cfg.reward, &sc)?;
        write_csv_rows(&dir.join("scale.csv"), &rows)?;
        if rows.len() >= 2 {
            let n: Vec<f64> = rows.iter().map(|r| r.n_sensors as f64).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.step_ms).collect();
            fs::write(dir.join("scale_fit.txt"), format!("step_time_exponent {:.4}\n", loglog_slope(&n, &t)))?;
        }
        Ok(())
    })
}
