//! Browser bindings: baseline rates on paired channels, the RIS reflection
//! pattern for aligned vs random phases, and an incremental DDPG trainer.

use aris_core::agent::Trainer;
use aris_core::baselines::{aligned_mrt_rate, aligned_phases, evaluate_policy, Policy, PolicySpec};
use aris_core::channel::steering_vector;
use aris_core::config::{default_config_text, ConfigMap, RunConfig, Strictness};
use aris_core::env::ChannelRefresh;
use aris_core::linalg::Complex;
use aris_core::rng::{stream, Stream};
use rand::Rng;
use wasm_bindgen::prelude::*;

fn err(e: aris_core::Error) -> String {
    e.to_string()
}

/// Documented configuration keys and defaults, one `key = value` per line.
#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config() -> String {
    default_config_text()
}

#[wasm_bindgen]
pub struct Simulator {
    config: RunConfig,
    trainer: Option<Trainer>,
}

#[wasm_bindgen]
impl Simulator {
    /// `overrides` holds `key = value` lines applied on top of the defaults.
    #[wasm_bindgen(constructor)]
    pub fn new(overrides: &str) -> Result<Simulator, String> {
        let map = ConfigMap::parse(overrides).map_err(err)?;
        let (config, _) = RunConfig::from_map(&map, Strictness::Strict).map_err(err)?;
        Ok(Simulator {
            config,
            trainer: None,
        })
    }

    #[wasm_bindgen(js_name = policyNames)]
    pub fn policy_names() -> Vec<String> {
        PolicySpec::ALL
            .iter()
            .map(|p| p.name().to_string())
            .collect()
    }

    /// Mean sum-rate of each baseline (order of `policyNames`) over the same
    /// `episodes` channel draws, `steps` steps each.
    #[wasm_bindgen(js_name = baselineRates)]
    pub fn baseline_rates(&self, episodes: usize, steps: usize) -> Result<Vec<f64>, String> {
        PolicySpec::ALL
            .iter()
            .map(|&p| {
                evaluate_policy(
                    Policy::Baseline(p),
                    &self.config.scenario,
                    episodes,
                    steps,
                    ChannelRefresh::PerEpisode,
                    self.config.seed,
                )
                .map(|r| r.mean)
                .map_err(err)
            })
            .collect()
    }

    /// Closed-form sum-rate of MRT with phases aligned on the mean channel.
    #[wasm_bindgen(js_name = alignedRate)]
    pub fn aligned_rate(&self) -> Result<f64, String> {
        aligned_mrt_rate(&self.config.scenario).map_err(err)
    }

    /// Normalised LoS gain |Σₙ e^{jθₙ} G[n,0] a_n(c)|² / N² of the cascaded
    /// BS→RIS→direction path for `points` direction cosines c ∈ [−1, 1].
    /// Returns the aligned-phase curve followed by a random-phase curve.
    #[wasm_bindgen(js_name = beamPattern)]
    pub fn beam_pattern(&self, points: usize) -> Result<Vec<f64>, String> {
        let sc = &self.config.scenario;
        let model = sc.channel_model().map_err(err)?;
        let n = sc.dims.n;
        let aligned = aligned_phases(&model, 0, sc.inner_product);
        let mut rng = stream(self.config.seed, Stream::Policy);
        let random: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let tr = model.los_tr();
        let points = points.max(2);
        let mut out = Vec::with_capacity(2 * points);
        for theta in [&aligned, &random] {
            for i in 0..points {
                let c = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
                let a = steering_vector(n, sc.channel.upsilon_over_lambda, c).map_err(err)?;
                let sum: Complex = (0..n)
                    .map(|k| a[(k, 0)].conj() * Complex::from_polar(1.0, theta[k]) * tr[(k, 0)])
                    .sum();
                out.push(sum.norm_sqr() / (n * n) as f64);
            }
        }
        Ok(out)
    }

    /// Direction cosine of each user as seen from the RIS.
    #[wasm_bindgen(js_name = userDirections)]
    pub fn user_directions(&self) -> Vec<f64> {
        let sc = &self.config.scenario;
        sc.channel.rk_angles.iter().map(|a| a.aod()).collect()
    }

    /// Runs up to `count` more training episodes and returns their mean
    /// rewards. The trainer is created on first use.
    #[wasm_bindgen(js_name = trainEpisodes)]
    pub fn train_episodes(&mut self, count: usize) -> Result<Vec<f64>, String> {
        if self.trainer.is_none() {
            let c = &self.config;
            let t = Trainer::new(c.scenario.clone(), c.agent.clone(), c.episodes, c.seed)
                .map_err(err)?;
            self.trainer = Some(t);
        }
        let trainer = self.trainer.as_mut().expect("created above");
        let mut rewards = Vec::with_capacity(count);
        for _ in 0..count {
            if trainer.finished() {
                break;
            }
            rewards.push(trainer.run_episode().map_err(err)?.mean_reward);
        }
        Ok(rewards)
    }

    #[wasm_bindgen(js_name = episodesDone)]
    pub fn episodes_done(&self) -> usize {
        self.trainer.as_ref().map_or(0, |t| t.log.rows.len())
    }

    /// Deterministic-policy sum-rate of the current actor on the baseline
    /// channel draws.
    #[wasm_bindgen(js_name = actorRate)]
    pub fn actor_rate(&self, episodes: usize, steps: usize) -> Result<f64, String> {
        let trainer = self.trainer.as_ref().ok_or("no training has run yet")?;
        evaluate_policy(
            Policy::Actor(&trainer.agent.nets.actor),
            &self.config.scenario,
            episodes,
            steps,
            ChannelRefresh::PerEpisode,
            self.config.seed,
        )
        .map(|r| r.mean)
        .map_err(err)
    }
}
