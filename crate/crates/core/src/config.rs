//! Run configuration: a line-oriented `key = value` format with `#`
//! comments and dotted keys.
//!
//! ```text
//! # two users, sixteen RIS elements
//! scenario.dims.K = 2
//! scenario.dims.N = 16
//! episode.episodes = 300
//! ```
//!
//! Every key has a documented default (see [`KEYS`]); a file only needs the
//! keys it changes. Unknown keys are rejected unless parsing is lenient, in
//! which case they are reported as warnings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::AgentHyper;
use crate::baselines::PolicySpec;
use crate::channel::{angles_from_geometry, ChannelParams, Geometry, PathLoss, RkAngles, TrAngles};
use crate::env::{ActionScaling, ChannelRefresh, EpisodeConfig, Scenario};
use crate::error::{Error, Result};
use crate::neural::UpdateRule;
use crate::system::{InnerProduct, NoiseModel, SystemDims};

/// `(key, default, description)` for every recognised key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("scenario.dims.M", "4", "base-station antennas"),
    ("scenario.dims.N", "16", "RIS elements"),
    ("scenario.dims.K", "2", "single-antenna users, K ≤ M"),
    (
        "scenario.geometry.bs",
        "0, 0, 10",
        "base station position x, y, z (m)",
    ),
    (
        "scenario.geometry.ris",
        "50, 50, 20",
        "aerial RIS position x, y, z (m)",
    ),
    (
        "scenario.geometry.users",
        "auto",
        "user positions `x, y; x, y; …` or auto (spread on the square perimeter)",
    ),
    (
        "scenario.geometry.square_side",
        "100",
        "side of the square the auto users are placed on (m)",
    ),
    (
        "scenario.channel.lambda0",
        "1e-3",
        "path loss at 1 m (linear)",
    ),
    ("scenario.channel.alpha", "2.2", "path-loss exponent"),
    ("scenario.channel.beta", "10", "Rician factor (linear)"),
    (
        "scenario.channel.upsilon_over_lambda",
        "0.5",
        "element spacing over wavelength",
    ),
    (
        "scenario.channel.path_loss",
        "amplitude",
        "amplitude (sqrt(λ0)/D^α) or power (sqrt(λ0/D^α))",
    ),
    (
        "scenario.channel.tr_angles",
        "auto",
        "BS→RIS angles `el_aod, az_aod, az_aoa, el_aoa` (rad) or auto",
    ),
    (
        "scenario.channel.rk_angles",
        "auto",
        "RIS→user angles `az_aod, el_aod; …` (rad) or auto",
    ),
    (
        "scenario.noise.sigma_sq",
        "1e-22",
        "noise variance (W), one value or one per user",
    ),
    ("scenario.p_max", "1", "transmit power budget (W)"),
    (
        "scenario.inner_product",
        "hermitian",
        "hermitian or transpose for the RIS→user leg",
    ),
    (
        "scenario.action_scaling",
        "per_entry",
        "per_entry or full precoder scaling before projection",
    ),
    ("episode.episodes", "300", "training episodes E"),
    ("episode.steps", "100", "steps per episode T"),
    (
        "episode.channel_refresh",
        "per_episode",
        "per_episode or per_step",
    ),
    ("agent.gamma", "0.99", "discount"),
    ("agent.tau_actor", "0.005", "actor soft-update rate"),
    ("agent.tau_critic", "0.005", "critic soft-update rate"),
    ("agent.batch", "64", "minibatch size"),
    ("agent.capacity", "100000", "replay capacity"),
    (
        "agent.warmup",
        "auto",
        "buffer fill before updates; auto = 10 × batch",
    ),
    (
        "agent.target_period",
        "1",
        "gradient updates between soft target updates",
    ),
    ("agent.noise_sigma0", "0.2", "initial exploration std"),
    (
        "agent.noise_decay",
        "0.995",
        "per-episode exploration decay",
    ),
    ("agent.actor_lr", "1e-4", "actor learning rate"),
    ("agent.critic_lr", "1e-3", "critic learning rate"),
    ("agent.beta1", "0.9", "Adam first-moment decay"),
    ("agent.beta2", "0.999", "Adam second-moment decay"),
    ("agent.adam_eps", "1e-8", "Adam epsilon"),
    ("agent.update_rule", "adam", "adam or sgd"),
    ("agent.actor_hidden", "256, 256", "actor hidden widths"),
    ("agent.critic_hidden", "256, 256", "critic hidden widths"),
    (
        "agent.actor_final_init",
        "3e-3",
        "init range of the last actor layer",
    ),
    (
        "agent.actor_uses_target_critic",
        "false",
        "actor ascends the target critic instead of the online one",
    ),
    (
        "agent.reward_normalization",
        "false",
        "running mean/std reward normalisation",
    ),
    (
        "baseline.kind",
        "random, mrt_random_phase, mrt_aligned_phase",
        "baselines evaluated next to the agent",
    ),
    ("eval.episodes", "20", "evaluation episodes"),
    (
        "eval.steps",
        "auto",
        "steps per evaluation episode; auto = episode.steps",
    ),
    ("run.seed", "0", "master seed"),
    ("run.out_dir", "runs/default", "output directory"),
];

/// Raw key/value pairs with the line each came from (0 for overrides).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, found {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line,
                    msg: format!("invalid key {key:?}"),
                });
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key {key:?} (first set on line {first})"),
                });
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(Self { entries })
    }

    /// Applies a `KEY=VALUE` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(spec, "override must look like KEY=VALUE"))?;
        self.set(key.trim(), value.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Value for `key`, falling back to its documented default.
    fn value(&self, key: &str) -> &str {
        self.get(key).unwrap_or_else(|| default_of(key))
    }
}

fn default_of(key: &str) -> &'static str {
    KEYS.iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, d, _)| *d)
        .unwrap_or_else(|| panic!("undocumented config key {key}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown keys are an error.
    #[default]
    Strict,
    /// Unknown keys are returned as warnings.
    Lenient,
}

/// Everything a training/evaluation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub episodes: EpisodeConfig,
    pub agent: AgentHyper,
    pub baselines: Vec<PolicySpec>,
    pub eval_episodes: usize,
    pub eval_steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// The effective key/value pairs, defaults included.
    pub resolved: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_map(&ConfigMap::default(), Strictness::Strict)
            .expect("documented defaults are valid")
            .0
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("expected a number, found {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_num(key, s)).collect()
}

fn parse_point<const D: usize>(key: &str, v: &str) -> Result<[f64; D]> {
    let xs = parse_list(key, v)?;
    xs.try_into().map_err(|xs: Vec<f64>| {
        Error::config(key, format!("expected {D} coordinates, found {}", xs.len()))
    })
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, found {v:?}"),
        )),
    }
}

fn parse_choice<T: Copy>(key: &str, v: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == v.trim())
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            Error::config(
                key,
                format!("expected one of {}, found {v:?}", names.join(", ")),
            )
        })
}

fn parse_widths(key: &str, v: &str) -> Result<Vec<usize>> {
    let widths: Vec<usize> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect::<Result<_>>()?;
    if widths.is_empty() || widths.contains(&0) {
        return Err(Error::config(key, "layer widths must be ≥ 1"));
    }
    Ok(widths)
}

impl RunConfig {
    pub fn from_text(text: &str, strictness: Strictness) -> Result<(Self, Vec<String>)> {
        Self::from_map(&ConfigMap::parse(text)?, strictness)
    }

    pub fn from_path(
        path: &Path,
        overrides: &[String],
        strictness: Strictness,
    ) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut map = ConfigMap::parse(&text)?;
        for o in overrides {
            map.set_override(o)?;
        }
        Self::from_map(&map, strictness)
    }

    /// Builds and validates a configuration. Returns warnings for unknown
    /// keys in lenient mode.
    pub fn from_map(map: &ConfigMap, strictness: Strictness) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        for key in map.keys() {
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                match strictness {
                    Strictness::Strict => return Err(Error::config(key, "unknown key")),
                    Strictness::Lenient => warnings.push(format!("ignoring unknown key {key}")),
                }
            }
        }
        let v = |key: &str| map.value(key);

        let m: usize = parse_num("scenario.dims.M", v("scenario.dims.M"))?;
        let n: usize = parse_num("scenario.dims.N", v("scenario.dims.N"))?;
        let k: usize = parse_num("scenario.dims.K", v("scenario.dims.K"))?;
        let dims = SystemDims::new(m, n, k)?;

        let users = match v("scenario.geometry.users").trim() {
            "auto" => {
                let side: f64 = parse_num(
                    "scenario.geometry.square_side",
                    v("scenario.geometry.square_side"),
                )?;
                if !(side > 0.0 && side.is_finite()) {
                    return Err(Error::config(
                        "scenario.geometry.square_side",
                        "side > 0 required",
                    ));
                }
                Geometry::square_perimeter_users(k, side)
            }
            list => list
                .split(';')
                .map(|p| parse_point::<2>("scenario.geometry.users", p))
                .collect::<Result<Vec<_>>>()?,
        };
        if users.len() != k {
            return Err(Error::config(
                "scenario.geometry.users",
                format!("{} positions given for K = {k}", users.len()),
            ));
        }
        let geometry = Geometry {
            bs: parse_point("scenario.geometry.bs", v("scenario.geometry.bs"))?,
            ris: parse_point("scenario.geometry.ris", v("scenario.geometry.ris"))?,
            users,
        };
        geometry.validate()?;
        let (auto_tr, auto_rk) = angles_from_geometry(&geometry);
        let tr_angles = match v("scenario.channel.tr_angles").trim() {
            "auto" => auto_tr,
            s => {
                let [a, b, c, d] = parse_point::<4>("scenario.channel.tr_angles", s)?;
                TrAngles {
                    elevation_aod: a,
                    azimuth_aod: b,
                    azimuth_aoa: c,
                    elevation_aoa: d,
                }
            }
        };
        let rk_angles = match v("scenario.channel.rk_angles").trim() {
            "auto" => auto_rk,
            s => {
                let rk = s
                    .split(';')
                    .map(|p| {
                        let [az, el] = parse_point::<2>("scenario.channel.rk_angles", p)?;
                        Ok(RkAngles {
                            azimuth_aod: az,
                            elevation_aod: el,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if rk.len() != k {
                    return Err(Error::config(
                        "scenario.channel.rk_angles",
                        format!("{} angle pairs given for K = {k}", rk.len()),
                    ));
                }
                rk
            }
        };
        let channel = ChannelParams {
            lambda0: parse_num("scenario.channel.lambda0", v("scenario.channel.lambda0"))?,
            alpha: parse_num("scenario.channel.alpha", v("scenario.channel.alpha"))?,
            beta: parse_num("scenario.channel.beta", v("scenario.channel.beta"))?,
            upsilon_over_lambda: parse_num(
                "scenario.channel.upsilon_over_lambda",
                v("scenario.channel.upsilon_over_lambda"),
            )?,
            tr_angles,
            rk_angles,
            path_loss: parse_choice(
                "scenario.channel.path_loss",
                v("scenario.channel.path_loss"),
                &[
                    ("amplitude", PathLoss::Amplitude),
                    ("power", PathLoss::Power),
                ],
            )?,
        };
        channel.validate()?;

        let sigma = parse_list("scenario.noise.sigma_sq", v("scenario.noise.sigma_sq"))?;
        let noise = match sigma.as_slice() {
            [s] => NoiseModel::uniform(*s, k),
            _ => NoiseModel { sigma_sq: sigma },
        };
        let scenario = Scenario {
            dims,
            geometry,
            channel,
            noise,
            p_max: parse_num("scenario.p_max", v("scenario.p_max"))?,
            inner_product: parse_choice(
                "scenario.inner_product",
                v("scenario.inner_product"),
                &[
                    ("hermitian", InnerProduct::Hermitian),
                    ("transpose", InnerProduct::Transpose),
                ],
            )?,
            action_scaling: parse_choice(
                "scenario.action_scaling",
                v("scenario.action_scaling"),
                &[
                    ("per_entry", ActionScaling::PerEntry),
                    ("full", ActionScaling::Full),
                ],
            )?,
        };
        scenario.validate()?;

        let episodes = EpisodeConfig {
            episodes: parse_num("episode.episodes", v("episode.episodes"))?,
            steps: parse_num("episode.steps", v("episode.steps"))?,
            refresh: parse_choice(
                "episode.channel_refresh",
                v("episode.channel_refresh"),
                &[
                    ("per_episode", ChannelRefresh::PerEpisode),
                    ("per_step", ChannelRefresh::PerStep),
                ],
            )?,
        };
        episodes.validate()?;

        let batch: usize = parse_num("agent.batch", v("agent.batch"))?;
        let agent = AgentHyper {
            gamma: parse_num("agent.gamma", v("agent.gamma"))?,
            tau_actor: parse_num("agent.tau_actor", v("agent.tau_actor"))?,
            tau_critic: parse_num("agent.tau_critic", v("agent.tau_critic"))?,
            batch,
            capacity: parse_num("agent.capacity", v("agent.capacity"))?,
            warmup: match v("agent.warmup").trim() {
                "auto" => 10 * batch,
                s => parse_num("agent.warmup", s)?,
            },
            target_period: parse_num("agent.target_period", v("agent.target_period"))?,
            noise_sigma0: parse_num("agent.noise_sigma0", v("agent.noise_sigma0"))?,
            noise_decay: parse_num("agent.noise_decay", v("agent.noise_decay"))?,
            actor_lr: parse_num("agent.actor_lr", v("agent.actor_lr"))?,
            critic_lr: parse_num("agent.critic_lr", v("agent.critic_lr"))?,
            beta1: parse_num("agent.beta1", v("agent.beta1"))?,
            beta2: parse_num("agent.beta2", v("agent.beta2"))?,
            adam_eps: parse_num("agent.adam_eps", v("agent.adam_eps"))?,
            update_rule: parse_choice(
                "agent.update_rule",
                v("agent.update_rule"),
                &[("adam", UpdateRule::Adam), ("sgd", UpdateRule::Sgd)],
            )?,
            actor_hidden: parse_widths("agent.actor_hidden", v("agent.actor_hidden"))?,
            critic_hidden: parse_widths("agent.critic_hidden", v("agent.critic_hidden"))?,
            actor_final_init: parse_num("agent.actor_final_init", v("agent.actor_final_init"))?,
            actor_uses_target_critic: parse_bool(
                "agent.actor_uses_target_critic",
                v("agent.actor_uses_target_critic"),
            )?,
            reward_normalization: parse_bool(
                "agent.reward_normalization",
                v("agent.reward_normalization"),
            )?,
        };
        agent.validate()?;

        let baselines = v("baseline.kind")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty() && *s != "none")
            .map(str::parse)
            .collect::<Result<Vec<PolicySpec>>>()?;
        let eval_episodes: usize = parse_num("eval.episodes", v("eval.episodes"))?;
        if eval_episodes == 0 {
            return Err(Error::config("eval.episodes", "≥ 1 required"));
        }
        let eval_steps = match v("eval.steps").trim() {
            "auto" => episodes.steps,
            s => parse_num("eval.steps", s)?,
        };
        if eval_steps == 0 {
            return Err(Error::config("eval.steps", "≥ 1 required"));
        }

        let resolved = KEYS
            .iter()
            .map(|(key, _, _)| (key.to_string(), v(key).to_string()))
            .collect();
        Ok((
            Self {
                scenario,
                episodes,
                agent,
                baselines,
                eval_episodes,
                eval_steps,
                seed: parse_num("run.seed", v("run.seed"))?,
                out_dir: PathBuf::from(v("run.out_dir")),
                resolved,
            },
            warnings,
        ))
    }

    /// The effective configuration in the same file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.resolved {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Copy of `self` with one key replaced, revalidated.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = ConfigMap::default();
        for (k, v) in &self.resolved {
            map.set(k, v);
        }
        map.set(key, value);
        Ok(Self::from_map(&map, Strictness::Strict)?.0)
    }
}

/// The documented keys, defaults and descriptions as a commented config file.
pub fn default_config_text() -> String {
    let mut out = String::from("# aerial-RIS DDPG run configuration; every key is optional\n");
    for (key, default, doc) in KEYS {
        let _ = writeln!(out, "\n# {doc}\n{key} = {default}");
    }
    out
}
