//! `aris` — train, evaluate and check the aerial-RIS DDPG beamformer.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric/runtime error,
//! 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use aris_core::config::{default_config_text, ConfigMap, RunConfig, Strictness};
use aris_core::diagnostics::{channel_stats, gradcheck_suite};
use aris_core::harness::{load_run, run_evaluation, run_training_with, sweep};
use aris_core::neural::GradCheckOptions;
use aris_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aris",
    version,
    about = "Aerial-RIS multi-user MISO beamforming with DDPG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file; documented defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides run.seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides run.out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// KEY=VALUE, applied after the file; repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Warn about unknown keys instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write metrics, checkpoints and a manifest
    Train(Common),
    /// Evaluate a trained run and/or the configured baselines on paired channels
    Eval {
        #[command(flatten)]
        common: Common,
        /// Run directory written by `train`; without it only baselines run
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluation episodes (overrides eval.episodes)
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train and evaluate once per value of a numeric key
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Numeric configuration key, e.g. scenario.p_max
        #[arg(long)]
        axis: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Finite-difference checks of the networks, critic loss and actor objective
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at the master seed
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Coordinates checked per weight matrix / bias vector (0 = all)
        #[arg(long, default_value_t = 24)]
        per_tensor: usize,
    },
    /// Empirical channel moments against the model
    ChannelStats {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Relative tolerance
        #[arg(long, default_value_t = 0.03)]
        tolerance: f64,
    },
    /// Print every configuration key with its default
    Defaults,
}

fn load_config(common: &Common, extra: &[(&str, String)]) -> Result<RunConfig> {
    let mut map = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            ConfigMap::parse(&text)?
        }
        None => ConfigMap::default(),
    };
    for o in &common.overrides {
        map.set_override(o)?;
    }
    if let Some(seed) = common.seed {
        map.set("run.seed", &seed.to_string());
    }
    if let Some(out) = &common.out {
        map.set("run.out_dir", &out.display().to_string());
    }
    for (k, v) in extra {
        map.set(k, v);
    }
    let strictness = if common.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let (config, warnings) = RunConfig::from_map(&map, strictness)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn train(common: &Common) -> Result<()> {
    let config = load_config(common, &[])?;
    let started = Instant::now();
    let total = config.episodes.episodes;
    let summary = run_training_with(&config, &config.out_dir, |m| {
        if (m.episode + 1) % 10 == 0 || m.episode + 1 == total {
            eprintln!(
                "episode {:>5}/{total}  mean reward {:.4}  critic loss {:.3e}  sigma {:.4}",
                m.episode + 1,
                m.mean_reward,
                m.critic_loss_mean,
                m.noise_sigma
            );
        }
    })?;
    println!(
        "trained {} episodes in {:.1} s; final-50 mean reward {:.4}; wrote {}",
        summary.log.rows.len(),
        started.elapsed().as_secs_f64(),
        summary.log.tail_mean(50),
        summary.out_dir.display()
    );
    Ok(())
}

fn eval(common: &Common, checkpoint: Option<&Path>, episodes: Option<usize>) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(n) = episodes {
        extra.push(("eval.episodes", n.to_string()));
    }
    // a run directory carries its own configuration unless one is given
    let config = match (checkpoint, &common.config) {
        (Some(dir), None) => {
            let (base, _) = load_run(dir)?;
            let mut map = ConfigMap::default();
            for (k, v) in &base.resolved {
                map.set(k, v);
            }
            for o in &common.overrides {
                map.set_override(o)?;
            }
            if let Some(seed) = common.seed {
                map.set("run.seed", &seed.to_string());
            }
            for (k, v) in &extra {
                map.set(k, v);
            }
            RunConfig::from_map(&map, Strictness::Strict)?.0
        }
        _ => load_config(common, &extra)?,
    };
    let out = common
        .out
        .clone()
        .or_else(|| checkpoint.map(Path::to_path_buf))
        .unwrap_or_else(|| config.out_dir.clone());
    let reports = run_evaluation(&config, checkpoint, &out)?;
    println!(
        "{:<20} {:>14} {:>10} {:>9}",
        "policy", "mean sum-rate", "std", "episodes"
    );
    for r in &reports {
        println!(
            "{:<20} {:>14.4} {:>10.4} {:>9}",
            r.policy,
            r.mean,
            r.std,
            r.per_episode.len()
        );
    }
    if let Some(first) = reports.first() {
        println!(
            "channel seeds (shared by all policies): {} … {}",
            first.channel_seeds[0],
            first.channel_seeds[first.channel_seeds.len() - 1]
        );
    }
    println!("wrote {}", out.join("eval_report.csv").display());
    Ok(())
}

fn run_sweep(common: &Common, axis: &str, values: &[String]) -> Result<()> {
    let config = load_config(common, &[])?;
    let points = sweep(&config, axis, values, &config.out_dir)?;
    for p in &points {
        let summary: Vec<String> = p
            .reports
            .iter()
            .map(|r| format!("{} {:.4}", r.policy, r.mean))
            .collect();
        println!("{axis} = {:<10} {}", p.value, summary.join("  "));
    }
    println!("wrote {}", config.out_dir.join("sweep.csv").display());
    Ok(())
}

fn gradcheck(common: &Common, seeds: u64, per_tensor: usize) -> Result<bool> {
    let config = load_config(common, &[])?;
    let started = Instant::now();
    let options = GradCheckOptions {
        per_tensor: (per_tensor > 0).then_some(per_tensor),
        ..GradCheckOptions::default()
    };
    let rows = gradcheck_suite(
        &config.scenario,
        &config.agent,
        config.seed..config.seed + seeds,
        options,
    )?;
    let mut worst: std::collections::BTreeMap<&str, f64> = Default::default();
    for r in &rows {
        let w = worst.entry(r.target).or_insert(0.0);
        *w = w.max(r.report.max_relative_error);
    }
    let mut ok = true;
    for (target, err) in &worst {
        let pass = *err < 1e-4;
        ok &= pass;
        println!(
            "{} {target:<16} max relative error {err:.3e}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} checks over {seeds} seeds in {:.1} s",
        rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(ok)
}

fn stats(common: &Common, draws: usize, tolerance: f64) -> Result<bool> {
    let config = load_config(common, &[])?;
    let checks = channel_stats(&config.scenario, draws, config.seed, tolerance)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed();
        println!(
            "{} {:<40} measured {:.6e}  model {:.6e}  rel err {:.4} (tol {})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.expected,
            c.relative_error(),
            c.tolerance
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(common) => train(common).map(|_| true),
        Command::Eval {
            common,
            checkpoint,
            episodes,
        } => eval(common, checkpoint.as_deref(), *episodes).map(|_| true),
        Command::Sweep {
            common,
            axis,
            values,
        } => run_sweep(common, axis, values).map(|_| true),
        Command::Gradcheck {
            common,
            seeds,
            per_tensor,
        } => gradcheck(common, *seeds, *per_tensor),
        Command::ChannelStats {
            common,
            draws,
            tolerance,
        } => stats(common, *draws, *tolerance),
        Command::Defaults => {
            print!("{}", default_config_text());
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        // a check ran and reported failures
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
