//! Orchestration and persistence: training runs, paired evaluation and
//! parameter sweeps, all writing versioned artifacts to an output directory.
//!
//! Layout of a training run directory:
//!
//! ```text
//! manifest.txt            format versions, seed, effective configuration
//! metrics.csv             one row per episode (deterministic)
//! timing.csv              wall-clock time per episode
//! checkpoints/actor.bin   + critic.bin, actor_target.bin, critic_target.bin
//! eval_report.csv         written by evaluation
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::agent::{AgentNets, MetricsLog, Trainer};
use crate::baselines::{evaluate_policy, EvalReport, Policy};
use crate::config::{ConfigMap, RunConfig, Strictness, KEYS};
use crate::error::{Error, Result};
use crate::neural::{Mlp, CHECKPOINT_MAJOR, CHECKPOINT_MINOR};
use crate::rng::derive_seed;

pub const MANIFEST_MAJOR: u16 = 1;
pub const MANIFEST_MINOR: u16 = 0;
pub const METRICS_VERSION: u16 = 1;
pub const EVAL_VERSION: u16 = 1;
pub const SWEEP_VERSION: u16 = 1;

pub const CHECKPOINT_FILES: [&str; 4] = ["actor", "critic", "actor_target", "critic_target"];

/// Offset mixed into the master seed for evaluation channels, so evaluation
/// never replays the training draws.
const EVAL_SEED_INDEX: u64 = 0x00E7_A100;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn checkpoint_path(dir: &Path, name: &str) -> PathBuf {
    dir.join("checkpoints").join(format!("{name}.bin"))
}

#[derive(Debug, Clone)]
pub struct TrainingSummary {
    pub out_dir: PathBuf,
    pub log: MetricsLog,
    pub nets: AgentNets,
}

/// Trains with `config` and writes the run directory.
pub fn run_training(config: &RunConfig, out_dir: &Path) -> Result<TrainingSummary> {
    run_training_with(config, out_dir, |_| {})
}

/// As [`run_training`], calling `progress` after every episode.
pub fn run_training_with(
    config: &RunConfig,
    out_dir: &Path,
    mut progress: impl FnMut(&crate::agent::EpisodeMetrics),
) -> Result<TrainingSummary> {
    create_dir(&out_dir.join("checkpoints"))?;
    let mut trainer = Trainer::new(
        config.scenario.clone(),
        config.agent.clone(),
        config.episodes,
        config.seed,
    )?;
    while !trainer.finished() {
        let row = trainer.run_episode()?;
        progress(row);
    }
    let nets = trainer.agent.nets;
    let log = trainer.log;
    write(&out_dir.join("metrics.csv"), log.to_csv())?;
    write(&out_dir.join("timing.csv"), log.timing_csv())?;
    for (name, net) in CHECKPOINT_FILES.iter().zip([
        &nets.actor,
        &nets.critic,
        &nets.actor_target,
        &nets.critic_target,
    ]) {
        write(&checkpoint_path(out_dir, name), net.to_bytes())?;
    }
    write(&out_dir.join("manifest.txt"), manifest_text(config))?;
    Ok(TrainingSummary {
        out_dir: out_dir.to_path_buf(),
        log,
        nets,
    })
}

/// The manifest uses the configuration format so it can be read back.
pub fn manifest_text(config: &RunConfig) -> String {
    let mut out = String::from("# training run manifest\n");
    let _ = writeln!(out, "manifest.version = {MANIFEST_MAJOR}.{MANIFEST_MINOR}");
    let _ = writeln!(
        out,
        "checkpoint.version = {CHECKPOINT_MAJOR}.{CHECKPOINT_MINOR}"
    );
    let _ = writeln!(out, "metrics.version = {METRICS_VERSION}");
    for name in CHECKPOINT_FILES {
        let _ = writeln!(out, "checkpoint.{name} = checkpoints/{name}.bin");
    }
    out.push_str("\n# effective configuration\n");
    out.push_str(&config.to_text());
    out
}

fn check_major(what: &'static str, found: Option<&str>, expected: u16) -> Result<()> {
    let found = found.ok_or_else(|| Error::Format {
        what,
        msg: "missing version".into(),
    })?;
    let major: Option<u16> = found.split('.').next().and_then(|m| m.trim().parse().ok());
    if major != Some(expected) {
        return Err(Error::Version {
            what,
            found: found.to_string(),
            expected,
        });
    }
    Ok(())
}

/// Reads a run directory back: configuration and all four networks.
pub fn load_run(dir: &Path) -> Result<(RunConfig, AgentNets)> {
    let text = read_to_string(&dir.join("manifest.txt"))?;
    let map = ConfigMap::parse(&text)?;
    check_major("manifest", map.get("manifest.version"), MANIFEST_MAJOR)?;
    check_major(
        "checkpoint",
        map.get("checkpoint.version"),
        CHECKPOINT_MAJOR,
    )?;
    let mut config_map = ConfigMap::default();
    for key in map.keys() {
        if KEYS.iter().any(|(k, _, _)| *k == key) {
            config_map.set(key, map.get(key).unwrap_or_default());
        }
    }
    let (config, _) = RunConfig::from_map(&config_map, Strictness::Strict)?;
    let load = |name: &str| -> Result<Mlp> {
        let path = checkpoint_path(dir, name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Mlp::from_bytes(&bytes)
    };
    let nets = AgentNets {
        actor: load("actor")?,
        critic: load("critic")?,
        actor_target: load("actor_target")?,
        critic_target: load("critic_target")?,
    };
    nets.validate()?;
    Ok((config, nets))
}

/// Evaluation seed shared by every policy of one configuration.
pub fn evaluation_seed(config: &RunConfig) -> u64 {
    derive_seed(config.seed, EVAL_SEED_INDEX)
}

/// Evaluates the actor (when given) and every configured baseline on the
/// same channel seeds.
pub fn evaluate_all(config: &RunConfig, actor: Option<&Mlp>) -> Result<Vec<EvalReport>> {
    let seed = evaluation_seed(config);
    let sc = &config.scenario;
    let mut reports = Vec::new();
    if let Some(actor) = actor {
        let (s, a) = (sc.dims.state_dim(), sc.dims.action_dim());
        if actor.input_dim() != s || actor.output_dim() != a {
            return Err(Error::Shape {
                op: "checkpoint vs scenario (state, action)",
                left: (actor.input_dim(), actor.output_dim()),
                right: (s, a),
            });
        }
        reports.push(evaluate_policy(
            Policy::Actor(actor),
            sc,
            config.eval_episodes,
            config.eval_steps,
            config.episodes.refresh,
            seed,
        )?);
    }
    for &b in &config.baselines {
        reports.push(evaluate_policy(
            Policy::Baseline(b),
            sc,
            config.eval_episodes,
            config.eval_steps,
            config.episodes.refresh,
            seed,
        )?);
    }
    Ok(reports)
}

pub fn eval_report_csv(reports: &[EvalReport]) -> String {
    let mut out =
        format!("# eval v{EVAL_VERSION}\npolicy,mean_sum_rate,std,episodes,channel_seeds\n");
    for r in reports {
        let seeds: Vec<String> = r.channel_seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{}",
            r.policy,
            r.mean,
            r.std,
            r.per_episode.len(),
            seeds.join(" ")
        );
    }
    out
}

/// Evaluation of a run directory (or of the baselines alone when
/// `checkpoint_dir` is `None`). Writes `eval_report.csv` into `out_dir`.
pub fn run_evaluation(
    config: &RunConfig,
    checkpoint_dir: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<EvalReport>> {
    let actor = match checkpoint_dir {
        Some(dir) => Some(load_run(dir)?.1.actor),
        None => None,
    };
    let reports = evaluate_all(config, actor.as_ref())?;
    create_dir(out_dir)?;
    write(&out_dir.join("eval_report.csv"), eval_report_csv(&reports))?;
    Ok(reports)
}

/// Parses a metrics CSV, rejecting unknown major versions.
pub fn read_metrics_csv(text: &str) -> Result<MetricsLog> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let version = header
        .strip_prefix("# metrics v")
        .ok_or_else(|| Error::Format {
            what: "metrics",
            msg: "missing version header".into(),
        })?;
    check_major("metrics", Some(version), METRICS_VERSION)?;
    if lines.next() != Some(MetricsLog::COLUMNS.join(",").as_str()) {
        return Err(Error::Format {
            what: "metrics",
            msg: "unexpected columns".into(),
        });
    }
    let mut log = MetricsLog::default();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format {
            what: "metrics",
            msg: format!("bad row {}", i + 1),
        };
        if f.len() != MetricsLog::COLUMNS.len() {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        log.rows.push(crate::agent::EpisodeMetrics {
            episode: f[0].parse().map_err(|_| bad())?,
            mean_reward: num(f[1])?,
            final_step_reward: num(f[2])?,
            critic_loss_mean: num(f[3])?,
            noise_sigma: num(f[4])?,
            wall_ms: 0.0,
        });
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub out_dir: PathBuf,
    pub train_tail_mean: f64,
    pub reports: Vec<EvalReport>,
}

/// Directory name of one sweep point.
pub fn sweep_dir(out_dir: &Path, axis: &str, value: &str) -> PathBuf {
    let clean: String = format!("{axis}={value}")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "=.-_".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    out_dir.join(clean)
}

/// One training plus evaluation per value of `axis`; writes `sweep.csv`.
pub fn sweep(
    config: &RunConfig,
    axis: &str,
    values: &[String],
    out_dir: &Path,
) -> Result<Vec<SweepPoint>> {
    let current = config
        .resolved
        .get(axis)
        .ok_or_else(|| Error::config(axis, "unknown sweep axis"))?;
    if current.trim().parse::<f64>().is_err() {
        return Err(Error::config(axis, "sweep axis must be a numeric key"));
    }
    if values.is_empty() {
        return Err(Error::config(axis, "no sweep values"));
    }
    for v in values {
        if v.trim().parse::<f64>().is_err() {
            return Err(Error::config(
                axis,
                format!("sweep value {v:?} is not numeric"),
            ));
        }
    }
    let configs = values
        .iter()
        .map(|v| config.with_override(axis, v.trim()))
        .collect::<Result<Vec<_>>>()?;
    create_dir(out_dir)?;
    let mut points = Vec::new();
    let mut csv = format!(
        "# sweep v{SWEEP_VERSION}\naxis,value,policy,mean_sum_rate,std,train_final50_mean\n"
    );
    for (v, cfg) in values.iter().zip(&configs) {
        let dir = sweep_dir(out_dir, axis, v.trim());
        let summary = run_training(cfg, &dir)?;
        let reports = evaluate_all(cfg, Some(&summary.nets.actor))?;
        write(&dir.join("eval_report.csv"), eval_report_csv(&reports))?;
        let tail = summary.log.tail_mean(50);
        for r in &reports {
            let _ = writeln!(
                csv,
                "{axis},{},{},{:e},{:e},{:e}",
                v.trim(),
                r.policy,
                r.mean,
                r.std,
                tail
            );
        }
        points.push(SweepPoint {
            value: v.trim().to_string(),
            out_dir: dir,
            train_tail_mean: tail,
            reports,
        });
    }
    write(&out_dir.join("sweep.csv"), csv)?;
    Ok(points)
}
