//! Non-learned reference policies and paired policy evaluation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::channel::{ChannelModel, ChannelRealization};
use crate::env::{decode_action, encode_phase, DecodedAction, Env, EpisodeConfig, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{diag_from_phases, wrap_phase, CMatrix};
use crate::neural::Mlp;
use crate::rng::{derive_seed, stream, Stream};
use crate::system::{effective_channel, project_power, Beamformer, InnerProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicySpec {
    /// Uniform action components in `[-1, 1]`.
    Random,
    /// Uniform RIS phases, MRT precoder on the resulting effective channel.
    MrtRandomPhase,
    /// RIS phases aligned to user 1's LoS cascade, MRT precoder.
    MrtAlignedPhase,
}

impl PolicySpec {
    pub const ALL: [PolicySpec; 3] = [
        PolicySpec::Random,
        PolicySpec::MrtRandomPhase,
        PolicySpec::MrtAlignedPhase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicySpec::Random => "random",
            PolicySpec::MrtRandomPhase => "mrt_random_phase",
            PolicySpec::MrtAlignedPhase => "mrt_aligned_phase",
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicySpec::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "baseline.kind",
                    format!("unknown policy {s:?}; expected random, mrt_random_phase or mrt_aligned_phase"),
                )
            })
    }
}

pub fn random_policy(scenario: &Scenario, rng: &mut impl Rng) -> Vec<f64> {
    (0..scenario.dims.action_dim())
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect()
}

/// Matched filter `w_k = sqrt(P_max/K) · h_kᴴ / ‖h_k‖` on the effective
/// channels `h_k` (rows) induced by `phi`.
pub fn mrt_policy(
    realization: &ChannelRealization,
    phi: &CMatrix,
    scenario: &Scenario,
) -> Result<Beamformer> {
    mrt_with(realization, phi, scenario.p_max, scenario.inner_product)
}

pub fn mrt_with(
    realization: &ChannelRealization,
    phi: &CMatrix,
    p_max: f64,
    mode: InnerProduct,
) -> Result<Beamformer> {
    let k_users = realization.g_rk.len();
    let m = realization.g_tr.cols();
    let per_user = (p_max / k_users as f64).sqrt();
    let mut w = CMatrix::zeros(m, k_users);
    for k in 0..k_users {
        let h = effective_channel(&realization.g_rk[k], phi, &realization.g_tr, mode)?;
        let norm = h.data().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateChannel(k));
        }
        for i in 0..m {
            w[(i, k)] = h[(0, i)].conj() * (per_user / norm);
        }
    }
    Ok(Beamformer::new(w))
}

/// Phases that co-phase every term of user `k`'s LoS cascade
/// `g_kᴴ φ a_R`, where `a_R` is the RIS arrival steering vector.
pub fn aligned_phases(model: &ChannelModel, k: usize, mode: InnerProduct) -> Vec<f64> {
    let g = model.los_rk(k);
    let tr = model.los_tr();
    (0..g.rows())
        .map(|n| {
            let arrival = tr[(n, 0)].arg();
            let user = g[(n, 0)].arg();
            let theta = match mode {
                InnerProduct::Hermitian => user - arrival,
                InnerProduct::Transpose => -user - arrival,
            };
            wrap_phase(theta)
        })
        .collect()
}

/// Raw action that re-encodes a precoder/phase pair as closely as the
/// action box allows; used for the previous-action slice of the state.
pub fn encode_action(w: &Beamformer, theta: &[f64], scenario: &Scenario) -> Vec<f64> {
    let dims = scenario.dims;
    let probe = decode_action(&vec![1.0; dims.action_dim()], scenario)
        .map(|d| d.w.w[(0, 0)].re)
        .unwrap_or(1.0);
    let scale = if probe > 0.0 { probe } else { 1.0 };
    let mk = dims.m * dims.k;
    let mut a = vec![0.0; dims.action_dim()];
    for r in 0..dims.m {
        for c in 0..dims.k {
            let z = w.w[(r, c)];
            a[r * dims.k + c] = (z.re / scale).clamp(-1.0, 1.0);
            a[mk + r * dims.k + c] = (z.im / scale).clamp(-1.0, 1.0);
        }
    }
    for (slot, &t) in a[2 * mk..].iter_mut().zip(theta) {
        *slot = encode_phase(t);
    }
    a
}

/// What drives the environment during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Baseline(PolicySpec),
    /// Deterministic actor output (no exploration noise).
    Actor(&'a Mlp),
    /// The same raw action every step.
    Fixed(&'a [f64]),
}

impl Policy<'_> {
    pub fn label(&self) -> String {
        match self {
            Policy::Baseline(p) => p.name().to_string(),
            Policy::Actor(_) => "ddpg".to_string(),
            Policy::Fixed(_) => "fixed".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub policy: String,
    pub mean: f64,
    pub std: f64,
    /// Mean per-step sum-rate of each episode.
    pub per_episode: Vec<f64>,
    /// Channel seed of each episode; identical across policies evaluated
    /// with the same master seed.
    pub channel_seeds: Vec<u64>,
}

/// Chooses the `(action, decoded)` pair for one step.
fn act(
    policy: &Policy<'_>,
    env: &Env,
    state: &[f64],
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, DecodedAction)> {
    let scenario = env.scenario();
    match policy {
        Policy::Baseline(PolicySpec::Random) => {
            let a = random_policy(scenario, rng);
            let d = decode_action(&a, scenario)?;
            Ok((a, d))
        }
        Policy::Baseline(spec) => {
            let theta: Vec<f64> = if *spec == PolicySpec::MrtAlignedPhase {
                aligned_phases(env.model(), 0, scenario.inner_product)
            } else {
                (0..scenario.dims.n)
                    .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                    .collect()
            };
            let phi = diag_from_phases(&theta)?;
            let w = project_power(
                &mrt_policy(env.realization(), &phi, scenario)?,
                scenario.p_max,
            )?;
            let a = encode_action(&w, &theta, scenario);
            Ok((a, DecodedAction { w, theta, phi }))
        }
        Policy::Actor(actor) => {
            let mut a = actor.predict(state)?;
            a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
            let d = decode_action(&a, scenario)?;
            Ok((a, d))
        }
        Policy::Fixed(a) => Ok((a.to_vec(), decode_action(a, scenario)?)),
    }
}

/// Runs `episodes` episodes of `steps` steps. Episode `i` draws its channel
/// from `derive_seed(seed, i)`, so two policies evaluated with the same
/// `seed` see identical channels.
pub fn evaluate_policy(
    policy: Policy<'_>,
    scenario: &Scenario,
    episodes: usize,
    steps: usize,
    refresh: crate::env::ChannelRefresh,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 || steps == 0 {
        return Err(Error::config(
            "eval.episodes",
            "need at least one episode and one step",
        ));
    }
    let mut per_episode = Vec::with_capacity(episodes);
    let mut channel_seeds = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let ep_seed = derive_seed(seed, i as u64);
        channel_seeds.push(ep_seed);
        let mut env = Env::new(scenario.clone(), refresh, stream(ep_seed, Stream::Channel))?;
        let mut rng = stream(ep_seed, Stream::Policy);
        let mut state = env.state().to_vec();
        let mut total = 0.0;
        for _ in 0..steps {
            let (a, decoded) = act(&policy, &env, &state, &mut rng)?;
            let out = env.step_decoded(&a, &decoded)?;
            total += out.reward;
            state = out.next_state;
        }
        per_episode.push(total / steps as f64);
    }
    let n = per_episode.len() as f64;
    let mean = per_episode.iter().sum::<f64>() / n;
    let std = if per_episode.len() > 1 {
        (per_episode.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        policy: policy.label(),
        mean,
        std,
        per_episode,
        channel_seeds,
    })
}

/// Mean per-step sum-rate of `policy` over the last `tail` episodes of the
/// exact channel sequence a [`Trainer`](crate::agent::Trainer) built with
/// `seed` trains on: the paired baseline for a training curve.
pub fn replay_training_channels(
    policy: Policy<'_>,
    scenario: &Scenario,
    episodes: EpisodeConfig,
    seed: u64,
    tail: usize,
) -> Result<f64> {
    episodes.validate()?;
    let mut env = Env::new(
        scenario.clone(),
        episodes.refresh,
        stream(seed, Stream::Channel),
    )?;
    let mut rng = stream(seed, Stream::Policy);
    let first = episodes.episodes.saturating_sub(tail);
    let (mut total, mut count) = (0.0, 0usize);
    for episode in 0..episodes.episodes {
        let mut state = env.reset();
        // earlier episodes still step: per-step refresh draws channels there
        for _ in 0..episodes.steps {
            let (a, decoded) = act(&policy, &env, &state, &mut rng)?;
            let out = env.step_decoded(&a, &decoded)?;
            if episode >= first {
                total += out.reward;
                count += 1;
            }
            state = out.next_state;
        }
    }
    Ok(total / count as f64)
}

/// Sum-rate of user 1's LoS-aligned phases with MRT on the noiseless mean
/// channel; the closed-form anchor for single-user sanity runs.
pub fn aligned_mrt_rate(scenario: &Scenario) -> Result<f64> {
    let model = scenario.channel_model()?;
    let real = ChannelRealization {
        g_tr: model.mean_tr(),
        g_rk: (0..scenario.dims.k).map(|k| model.mean_rk(k)).collect(),
    };
    let theta = aligned_phases(&model, 0, scenario.inner_product);
    let phi = diag_from_phases(&theta)?;
    let w = mrt_policy(&real, &phi, scenario)?;
    let budget =
        crate::system::LinkBudget::new(&real, &phi, &w, &scenario.noise, scenario.inner_product)?;
    Ok(budget.sum_rate())
}
