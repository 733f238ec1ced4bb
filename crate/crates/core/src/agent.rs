//! DDPG learner: replay memory, online/target actor-critic pairs, Gaussian
//! exploration and the per-step update schedule.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::env::{Env, EpisodeConfig, Experience, Scenario};
use crate::error::{Error, Result};
use crate::neural::{
    adam_step, Activation, AdamConfig, AdamState, Batch, LayerSpec, Mlp, UpdateRule,
};
use crate::rng::{stream, SimRng, Stream};

/// Bounded FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
    dims: Option<(usize, usize)>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config(
                "agent.capacity",
                "replay capacity must be ≥ 1",
            ));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            dims: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    pub fn store(&mut self, e: Experience) -> Result<()> {
        let dims = (e.state.len(), e.action.len());
        match self.dims {
            None => self.dims = Some(dims),
            Some(d) if d != dims || e.next_state.len() != d.0 => {
                return Err(Error::Shape {
                    op: "ReplayBuffer::store",
                    left: dims,
                    right: d,
                })
            }
            Some(_) => {}
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        Ok(())
    }

    /// `batch` uniform draws with replacement.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<&Experience>> {
        if batch == 0 || self.items.len() < batch {
            return Err(Error::NotReady {
                have: self.items.len(),
                need: batch.max(1),
            });
        }
        let n = self.items.len();
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..n)])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentHyper {
    /// Discount ζ.
    pub gamma: f64,
    pub tau_actor: f64,
    pub tau_critic: f64,
    pub batch: usize,
    pub capacity: usize,
    /// Minimum buffer fill before updates start.
    pub warmup: usize,
    /// Soft target update every this many gradient updates.
    pub target_period: usize,
    pub noise_sigma0: f64,
    pub noise_decay: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub update_rule: UpdateRule,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Range of the last actor layer at initialisation.
    pub actor_final_init: f64,
    pub actor_uses_target_critic: bool,
    pub reward_normalization: bool,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau_actor: 0.005,
            tau_critic: 0.005,
            batch: 64,
            capacity: 100_000,
            warmup: 640,
            target_period: 1,
            noise_sigma0: 0.2,
            noise_decay: 0.995,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            update_rule: UpdateRule::Adam,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            actor_final_init: 3e-3,
            actor_uses_target_critic: false,
            reward_normalization: false,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        let unit = |key: &str, v: f64, lo_open: bool| {
            let ok = if lo_open {
                v > 0.0 && v <= 1.0
            } else {
                (0.0..=1.0).contains(&v)
            };
            if ok {
                Ok(())
            } else {
                let range = if lo_open { "(0, 1]" } else { "[0, 1]" };
                Err(Error::config(key, format!("must lie in {range}, got {v}")))
            }
        };
        unit("agent.gamma", self.gamma, false)?;
        unit("agent.tau_actor", self.tau_actor, true)?;
        unit("agent.tau_critic", self.tau_critic, true)?;
        unit("agent.beta1", self.beta1, false)?;
        unit("agent.beta2", self.beta2, false)?;
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::config("agent.beta1", "Adam decay rates must be < 1"));
        }
        let counts = [
            ("agent.batch", self.batch),
            ("agent.capacity", self.capacity),
            ("agent.warmup", self.warmup),
            ("agent.target_period", self.target_period),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(Error::config(key, "must be ≥ 1"));
            }
        }
        let positive = [
            ("agent.actor_lr", self.actor_lr),
            ("agent.critic_lr", self.critic_lr),
            ("agent.adam_eps", self.adam_eps),
            ("agent.actor_final_init", self.actor_final_init),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        if !(self.noise_sigma0.is_finite() && self.noise_sigma0 >= 0.0) {
            return Err(Error::config("agent.noise_sigma0", "must be ≥ 0"));
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::config("agent.noise_decay", "must lie in (0, 1]"));
        }
        if self.actor_hidden.contains(&0) {
            return Err(Error::config(
                "agent.actor_hidden",
                "layer widths must be ≥ 1",
            ));
        }
        if self.critic_hidden.contains(&0) {
            return Err(Error::config(
                "agent.critic_hidden",
                "layer widths must be ≥ 1",
            ));
        }
        Ok(())
    }

    pub fn noise_sigma(&self, episode: usize) -> f64 {
        self.noise_sigma0 * self.noise_decay.powi(episode as i32)
    }

    pub fn actor_specs(&self, action_dim: usize) -> Vec<LayerSpec> {
        hidden_specs(&self.actor_hidden, action_dim, Activation::Tanh)
    }

    pub fn critic_specs(&self) -> Vec<LayerSpec> {
        hidden_specs(&self.critic_hidden, 1, Activation::Linear)
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
            rule: self.update_rule,
        }
    }
}

fn hidden_specs(hidden: &[usize], out: usize, last: Activation) -> Vec<LayerSpec> {
    hidden
        .iter()
        .map(|&h| LayerSpec {
            outputs: h,
            activation: Activation::Relu,
        })
        .chain(std::iter::once(LayerSpec {
            outputs: out,
            activation: last,
        }))
        .collect()
}

/// Parameter count of a dense chain `input → hidden… → output`.
pub fn dense_param_count(input: usize, hidden: &[usize], output: usize) -> usize {
    let mut widths = vec![input];
    widths.extend_from_slice(hidden);
    widths.push(output);
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Online and target networks.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
}

impl AgentNets {
    pub fn init(
        state_dim: usize,
        action_dim: usize,
        hyper: &AgentHyper,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let actor = Mlp::init(
            state_dim,
            &hyper.actor_specs(action_dim),
            Some(hyper.actor_final_init),
            rng,
        )?;
        let critic = Mlp::init(state_dim + action_dim, &hyper.critic_specs(), None, rng)?;
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Checks the structural invariants after loading.
    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.state_dim(), self.action_dim());
        if !self.actor.is_congruent(&self.actor_target)
            || !self.critic.is_congruent(&self.critic_target)
            || self.critic.input_dim() != s + a
            || self.critic.output_dim() != 1
        {
            return Err(Error::Format {
                what: "agent networks",
                msg: format!(
                    "actor {}→{}, critic {}→{} are not a consistent set",
                    s,
                    a,
                    self.critic.input_dim(),
                    self.critic.output_dim()
                ),
            });
        }
        Ok(())
    }
}

/// Actor output plus clamped Gaussian noise. `sigma = 0` consumes no
/// randomness.
pub fn select_action(
    actor: &Mlp,
    state: &[f64],
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mut a = actor.predict(state)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|_| Error::NonFinite("noise sigma"))?;
        for v in a.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    for v in a.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(a)
}

/// Welford running mean/variance of rewards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RewardNormalizer {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RewardNormalizer {
    pub fn observe(&mut self, r: f64) {
        self.count += 1;
        let d = r - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (r - self.mean);
    }

    pub fn normalize(&self, r: f64) -> f64 {
        if self.count < 2 {
            return r - self.mean;
        }
        let std = (self.m2 / (self.count - 1) as f64).sqrt();
        (r - self.mean) / std.max(1e-8)
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Batch> {
    let rows: Vec<&[f64]> = rows.collect();
    Batch::from_rows(&rows)
}

/// Learner state: networks, optimisers, replay memory.
#[derive(Debug, Clone)]
pub struct Agent {
    pub hyper: AgentHyper,
    pub nets: AgentNets,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub buffer: ReplayBuffer,
    pub normalizer: RewardNormalizer,
    updates: u64,
}

impl Agent {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hyper: AgentHyper,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        hyper.validate()?;
        let nets = AgentNets::init(state_dim, action_dim, &hyper, rng)?;
        Self::from_nets(nets, hyper)
    }

    pub fn from_nets(nets: AgentNets, hyper: AgentHyper) -> Result<Self> {
        hyper.validate()?;
        nets.validate()?;
        Ok(Self {
            actor_opt: AdamState::new(&nets.actor, hyper.adam(hyper.actor_lr)),
            critic_opt: AdamState::new(&nets.critic, hyper.adam(hyper.critic_lr)),
            buffer: ReplayBuffer::new(hyper.capacity)?,
            normalizer: RewardNormalizer::default(),
            updates: 0,
            nets,
            hyper,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.nets.actor.predict(state)?;
        a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        Ok(a)
    }

    /// Stores an experience, normalising its reward when configured.
    pub fn remember(&mut self, mut e: Experience) -> Result<()> {
        if self.hyper.reward_normalization {
            self.normalizer.observe(e.reward);
            e.reward = self.normalizer.normalize(e.reward);
        }
        self.buffer.store(e)
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.hyper.warmup.max(self.hyper.batch)
    }

    /// Critic then actor update on one minibatch, then the scheduled soft
    /// update. Returns the pre-update critic loss, or `None` while the buffer
    /// is warming up.
    pub fn learn(&mut self, rng: &mut impl Rng) -> Result<Option<f64>> {
        if !self.ready() {
            return Ok(None);
        }
        let batch: Vec<Experience> = self
            .buffer
            .sample(self.hyper.batch, rng)?
            .into_iter()
            .cloned()
            .collect();
        let loss = critic_update(&mut self.nets, &batch, &self.hyper, &mut self.critic_opt)?;
        actor_update(&mut self.nets, &batch, &self.hyper, &mut self.actor_opt)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.hyper.target_period as u64) {
            soft_update_targets(&mut self.nets, &self.hyper)?;
        }
        Ok(Some(loss))
    }
}

/// TD targets `y = r + ζ·Q†(s′, μ†(s′))`.
pub fn td_targets(nets: &AgentNets, batch: &[Experience], gamma: f64) -> Result<Vec<f64>> {
    let next = stack(batch.iter().map(|e| e.next_state.as_slice()))?;
    let next_actions = nets.actor_target.predict_batch(&next)?;
    let q_next = nets
        .critic_target
        .predict_batch(&Batch::hcat(&next, &next_actions)?)?;
    Ok(batch
        .iter()
        .zip(q_next.data())
        .map(|(e, q)| e.reward + gamma * q)
        .collect())
}

/// Mean-squared TD error and its gradient with respect to the critic.
pub fn critic_loss_and_grad(
    nets: &AgentNets,
    batch: &[Experience],
    gamma: f64,
) -> Result<(f64, crate::neural::GradientSet)> {
    if batch.is_empty() {
        return Err(Error::Empty("critic minibatch"));
    }
    let targets = td_targets(nets, batch, gamma)?;
    let states = stack(batch.iter().map(|e| e.state.as_slice()))?;
    let actions = stack(batch.iter().map(|e| e.action.as_slice()))?;
    let (q, cache) = nets
        .critic
        .forward_batch(&Batch::hcat(&states, &actions)?)?;
    let b = batch.len() as f64;
    let mut loss = 0.0;
    let mut dq = Vec::with_capacity(batch.len());
    for (qv, y) in q.data().iter().zip(&targets) {
        let d = qv - y;
        loss += d * d;
        dq.push(2.0 * d / b);
    }
    let (grads, _) = nets
        .critic
        .backward_batch(&cache, &Batch::new(batch.len(), 1, dq)?)?;
    Ok((loss / b, grads))
}

/// One Adam step on the online critic. Returns the pre-update loss.
pub fn critic_update(
    nets: &mut AgentNets,
    batch: &[Experience],
    hyper: &AgentHyper,
    opt: &mut AdamState,
) -> Result<f64> {
    let (loss, grads) = critic_loss_and_grad(nets, batch, hyper.gamma)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    adam_step(&mut nets.critic, &grads, opt)?;
    Ok(loss)
}

/// `mean_s Q(s, μ(s))` and the gradient of its negation with respect to the
/// actor (the quantity the optimiser descends).
pub fn actor_objective_and_grad(
    nets: &AgentNets,
    batch: &[Experience],
    use_target_critic: bool,
) -> Result<(f64, crate::neural::GradientSet)> {
    if batch.is_empty() {
        return Err(Error::Empty("actor minibatch"));
    }
    let critic = if use_target_critic {
        &nets.critic_target
    } else {
        &nets.critic
    };
    let states = stack(batch.iter().map(|e| e.state.as_slice()))?;
    let (actions, actor_cache) = nets.actor.forward_batch(&states)?;
    let (q, critic_cache) = critic.forward_batch(&Batch::hcat(&states, &actions)?)?;
    let b = batch.len() as f64;
    let objective = q.data().iter().sum::<f64>() / b;
    let dx = critic.input_gradient(
        &critic_cache,
        &Batch::new(batch.len(), 1, vec![-1.0 / b; batch.len()])?,
    )?;
    let s = states.cols();
    let da = dx.columns(s, s + actions.cols());
    let (grads, _) = nets.actor.backward_batch(&actor_cache, &da)?;
    Ok((objective, grads))
}

/// One Adam ascent step on `mean_s Q(s, μ(s))`. Returns the pre-update value.
pub fn actor_update(
    nets: &mut AgentNets,
    batch: &[Experience],
    hyper: &AgentHyper,
    opt: &mut AdamState,
) -> Result<f64> {
    let (objective, grads) = actor_objective_and_grad(nets, batch, hyper.actor_uses_target_critic)?;
    if !objective.is_finite() {
        return Err(Error::NonFinite("actor objective"));
    }
    adam_step(&mut nets.actor, &grads, opt)?;
    Ok(objective)
}

pub fn soft_update_targets(nets: &mut AgentNets, hyper: &AgentHyper) -> Result<()> {
    nets.actor_target
        .soft_update_from(&nets.actor, hyper.tau_actor)?;
    nets.critic_target
        .soft_update_from(&nets.critic, hyper.tau_critic)
}

/// Steps needed for `‖target − online‖∞` to fall below `tol` from `delta0`
/// under repeated soft updates with rate `eta`.
pub fn soft_update_steps(delta0: f64, tol: f64, eta: f64) -> usize {
    if delta0 <= tol {
        return 0;
    }
    ((tol / delta0).ln() / (1.0 - eta).ln()).ceil() as usize
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub mean_reward: f64,
    pub final_step_reward: f64,
    /// NaN when no update happened in the episode.
    pub critic_loss_mean: f64,
    pub noise_sigma: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<EpisodeMetrics>,
}

impl MetricsLog {
    pub const COLUMNS: [&'static str; 5] = [
        "episode",
        "mean_reward",
        "final_step_reward",
        "critic_loss_mean",
        "noise_sigma",
    ];

    /// Deterministic columns only; wall-clock time is written separately.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# metrics v1\n{}\n", Self::COLUMNS.join(","));
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                r.episode, r.mean_reward, r.final_step_reward, r.critic_loss_mean, r.noise_sigma
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("episode,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:.3}\n", r.episode, r.wall_ms));
        }
        out
    }

    /// Mean of `mean_reward` over the last `n` episodes.
    pub fn tail_mean(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return f64::NAN;
        }
        tail.iter().map(|r| r.mean_reward).sum::<f64>() / tail.len() as f64
    }
}

/// Wall clock for the timing log; wasm32-unknown-unknown has no clock, so
/// there it reads zero.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64() * 1e3;
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Episode-at-a-time training driver.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: Env,
    pub agent: Agent,
    pub episodes: EpisodeConfig,
    pub log: MetricsLog,
    exploration: SimRng,
    replay: SimRng,
}

impl Trainer {
    pub fn new(
        scenario: Scenario,
        hyper: AgentHyper,
        episodes: EpisodeConfig,
        seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        episodes.validate()?;
        hyper.validate()?;
        let env = Env::new(scenario, episodes.refresh, stream(seed, Stream::Channel))?;
        let agent = Agent::new(
            env.state_dim(),
            env.action_dim(),
            hyper,
            &mut stream(seed, Stream::Init),
        )?;
        Ok(Self {
            env,
            agent,
            episodes,
            log: MetricsLog::default(),
            exploration: stream(seed, Stream::Exploration),
            replay: stream(seed, Stream::Replay),
        })
    }

    pub fn finished(&self) -> bool {
        self.log.rows.len() >= self.episodes.episodes
    }

    pub fn run_episode(&mut self) -> Result<&EpisodeMetrics> {
        let started = Stopwatch::start();
        let episode = self.log.rows.len();
        let sigma = self.agent.hyper.noise_sigma(episode);
        let mut state = self.env.reset();
        let (mut reward_sum, mut last_reward) = (0.0, 0.0);
        let (mut loss_sum, mut losses) = (0.0, 0usize);
        for _ in 0..self.episodes.steps {
            let action =
                select_action(&self.agent.nets.actor, &state, sigma, &mut self.exploration)?;
            let out = self.env.step(&action)?;
            reward_sum += out.reward;
            last_reward = out.reward;
            self.agent.remember(Experience {
                state,
                action,
                reward: out.reward,
                next_state: out.next_state.clone(),
            })?;
            if let Some(loss) = self.agent.learn(&mut self.replay)? {
                loss_sum += loss;
                losses += 1;
            }
            state = out.next_state;
        }
        self.log.rows.push(EpisodeMetrics {
            episode,
            mean_reward: reward_sum / self.episodes.steps as f64,
            final_step_reward: last_reward,
            critic_loss_mean: if losses == 0 {
                f64::NAN
            } else {
                loss_sum / losses as f64
            },
            noise_sigma: sigma,
            wall_ms: started.elapsed_ms(),
        });
        Ok(self.log.rows.last().expect("just pushed"))
    }

    pub fn run(mut self) -> Result<(Agent, MetricsLog)> {
        while !self.finished() {
            self.run_episode()?;
        }
        Ok((self.agent, self.log))
    }
}

/// Full training run, deterministic in `seed`.
pub fn train(
    scenario: &Scenario,
    hyper: &AgentHyper,
    episodes: &EpisodeConfig,
    seed: u64,
) -> Result<(Agent, MetricsLog)> {
    Trainer::new(scenario.clone(), hyper.clone(), *episodes, seed)?.run()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::env::tests::small_scenario;
    use crate::env::ChannelRefresh;
    use crate::neural::{check_coordinates, select_coordinates, tensor_sizes, Probe};

    fn tagged(tag: usize) -> Experience {
        Experience {
            state: vec![tag as f64],
            action: vec![0.0],
            reward: tag as f64,
            next_state: vec![tag as f64 + 1.0],
        }
    }

    fn small_hyper() -> AgentHyper {
        AgentHyper {
            actor_hidden: vec![16, 16],
            critic_hidden: vec![16, 16],
            batch: 8,
            warmup: 8,
            ..AgentHyper::default()
        }
    }

    fn random_batch(s: usize, a: usize, n: usize, seed: u64) -> Vec<Experience> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Experience {
                state: (0..s).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
                reward: rng.random_range(0.0..3.0),
                next_state: (0..s).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn replay_fifo() {
        let mut buf = ReplayBuffer::new(2).unwrap();
        assert!(buf.is_empty());
        for t in 1..=3 {
            buf.store(tagged(t)).unwrap();
        }
        let tags: Vec<f64> = buf.iter().map(|e| e.reward).collect();
        assert_eq!(tags, vec![2.0, 3.0]);
        assert!(buf
            .store(Experience {
                state: vec![0.0; 2],
                ..tagged(0)
            })
            .is_err());
    }

    #[test]
    fn replay_not_ready_and_single() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            buf.sample(1, &mut rng),
            Err(Error::NotReady { .. })
        ));
        buf.store(tagged(5)).unwrap();
        assert_eq!(buf.sample(1, &mut rng).unwrap()[0].reward, 5.0);
        assert!(buf.sample(2, &mut rng).is_err());
    }

    #[test]
    fn replay_sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for t in 0..10 {
            buf.store(tagged(t)).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            for e in buf.sample(10, &mut rng).unwrap() {
                counts[e.reward as usize] += 1;
            }
        }
        for c in counts {
            let frac = c as f64 / 1e5;
            assert!((frac - 0.1).abs() < 0.005, "{counts:?}");
        }
    }

    #[test]
    fn zero_noise_is_deterministic_and_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = small_hyper();
        let actor = Mlp::init(5, &h.actor_specs(3), Some(3e-3), &mut rng).unwrap();
        let s = [0.1, 0.2, 0.3, 0.4, 0.5];
        let a1 = select_action(&actor, &s, 0.0, &mut rng).unwrap();
        let a2 = select_action(&actor, &s, 0.0, &mut rng).unwrap();
        assert_eq!(a1, a2);
        let mut saturated = 0;
        for _ in 0..10_000 {
            let a = select_action(&actor, &s, 10.0, &mut rng).unwrap();
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            saturated += a.iter().filter(|v| v.abs() == 1.0).count();
        }
        // P(|N(μ≈0, 10)| > 1) ≈ 0.920
        let frac = saturated as f64 / 30_000.0;
        assert!((frac - 0.920).abs() < 0.01, "{frac}");
    }

    #[test]
    fn targets_start_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nets = AgentNets::init(6, 2, &small_hyper(), &mut rng).unwrap();
        assert_eq!(nets.actor, nets.actor_target);
        assert_eq!(nets.critic, nets.critic_target);
    }

    #[test]
    fn default_param_counts() {
        let (s, a) = (228, 32);
        let h = AgentHyper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nets = AgentNets::init(s, a, &h, &mut rng).unwrap();
        assert_eq!(
            nets.actor.param_count(),
            228 * 256 + 256 + 256 * 256 + 256 + 256 * 32 + 32
        );
        assert_eq!(
            nets.critic.param_count(),
            260 * 256 + 256 + 256 * 256 + 256 + 256 + 1
        );
        assert_eq!(
            nets.actor.param_count(),
            dense_param_count(s, &h.actor_hidden, a)
        );
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let h = small_hyper();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nets = AgentNets::init(4, 2, &h, &mut rng).unwrap();
            let batch = random_batch(4, 2, 1, seed + 100);
            let (_, grads) = critic_loss_and_grad(&nets, &batch, h.gamma).unwrap();
            let point = nets.critic.flat_params();
            let coords = select_coordinates(&tensor_sizes(&nets.critic), None, &mut rng);
            let mut probe = nets.clone();
            let report = check_coordinates(&point, &grads.flat(), &coords, 1e-5, |p| {
                probe.critic.set_flat_params(p).unwrap();
                let inp =
                    Batch::from_row(&[batch[0].state.clone(), batch[0].action.clone()].concat());
                let (_, cache) = probe.critic.forward_batch(&inp).unwrap();
                Probe {
                    value: critic_loss_and_grad(&probe, &batch, h.gamma).unwrap().0,
                    pattern: probe.critic.relu_pattern(&cache),
                }
            });
            assert!(report.max_relative_error < 1e-4, "{report:?}");
            assert!(report.checked > report.skipped);
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let h = AgentHyper {
            actor_final_init: 0.3,
            ..small_hyper()
        };
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nets = AgentNets::init(4, 2, &h, &mut rng).unwrap();
            let batch = random_batch(4, 2, 3, seed + 200);
            let (_, grads) = actor_objective_and_grad(&nets, &batch, false).unwrap();
            let point = nets.actor.flat_params();
            let coords = select_coordinates(&tensor_sizes(&nets.actor), None, &mut rng);
            let mut probe = nets.clone();
            let report = check_coordinates(&point, &grads.flat(), &coords, 1e-5, |p| {
                probe.actor.set_flat_params(p).unwrap();
                let states = stack(batch.iter().map(|e| e.state.as_slice())).unwrap();
                let (acts, ac) = probe.actor.forward_batch(&states).unwrap();
                let (_, cc) = probe
                    .critic
                    .forward_batch(&Batch::hcat(&states, &acts).unwrap())
                    .unwrap();
                let pattern =
                    probe.actor.relu_pattern(&ac) ^ probe.critic.relu_pattern(&cc).rotate_left(1);
                Probe {
                    // the gradient is of the negated objective
                    value: -actor_objective_and_grad(&probe, &batch, false).unwrap().0,
                    pattern,
                }
            });
            assert!(report.max_relative_error < 1e-4, "{report:?}");
        }
    }

    #[test]
    fn updates_touch_only_their_network() {
        let h = small_hyper();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut nets = AgentNets::init(4, 2, &h, &mut rng).unwrap();
        let batch = random_batch(4, 2, 8, 1);
        let mut copt = AdamState::new(&nets.critic, h.adam(h.critic_lr));
        let mut aopt = AdamState::new(&nets.actor, h.adam(h.actor_lr));
        let actor_hash = nets.actor.param_hash();
        let targets = (
            nets.actor_target.param_hash(),
            nets.critic_target.param_hash(),
        );
        critic_update(&mut nets, &batch, &h, &mut copt).unwrap();
        assert_eq!(nets.actor.param_hash(), actor_hash);
        let critic_hash = nets.critic.param_hash();
        actor_update(&mut nets, &batch, &h, &mut aopt).unwrap();
        assert_eq!(nets.critic.param_hash(), critic_hash);
        assert_ne!(nets.actor.param_hash(), actor_hash);
        assert_eq!(nets.actor_target.param_hash(), targets.0);
        assert_eq!(nets.critic_target.param_hash(), targets.1);
    }

    #[test]
    fn zero_discount_exact_critic_has_zero_loss() {
        // critic = linear read-out of the reward stored in the state
        let layer = crate::neural::Layer {
            inputs: 3,
            outputs: 1,
            weights: vec![1.0, 0.0, 0.0],
            bias: vec![0.0],
            activation: Activation::Linear,
        };
        let critic = Mlp::from_layers(vec![layer]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Mlp::init(
            2,
            &[LayerSpec {
                outputs: 1,
                activation: Activation::Tanh,
            }],
            None,
            &mut rng,
        )
        .unwrap();
        let mut nets = AgentNets {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        };
        let batch: Vec<Experience> = (0..4)
            .map(|i| Experience {
                state: vec![i as f64 * 0.5, 1.0],
                action: vec![0.3],
                reward: i as f64 * 0.5,
                next_state: vec![9.0, 9.0],
            })
            .collect();
        let h = AgentHyper {
            gamma: 0.0,
            ..small_hyper()
        };
        let before = nets.critic.flat_params();
        let mut opt = AdamState::new(&nets.critic, h.adam(h.critic_lr));
        let loss = critic_update(&mut nets, &batch, &h, &mut opt).unwrap();
        assert_eq!(loss, 0.0);
        for (a, b) in nets.critic.flat_params().iter().zip(&before) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_critic_leaves_actor() {
        let h = small_hyper();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = AgentNets::init(4, 2, &h, &mut rng).unwrap();
        let mut flat = nets.critic.flat_params();
        let n = flat.len();
        flat.iter_mut().for_each(|v| *v = 0.0);
        flat[n - 1] = 2.5;
        nets.critic.set_flat_params(&flat).unwrap();
        let before = nets.actor.flat_params();
        let mut opt = AdamState::new(&nets.actor, h.adam(h.actor_lr));
        let q = actor_update(&mut nets, &random_batch(4, 2, 8, 3), &h, &mut opt).unwrap();
        assert_eq!(q, 2.5);
        for (a, b) in nets.actor.flat_params().iter().zip(&before) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn actor_step_ascends() {
        let h = AgentHyper {
            actor_lr: 1e-6,
            actor_final_init: 0.3,
            ..small_hyper()
        };
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut nets = AgentNets::init(4, 2, &h, &mut rng).unwrap();
            let batch = random_batch(4, 2, 8, seed);
            let mut opt = AdamState::new(&nets.actor, h.adam(h.actor_lr));
            let before = actor_update(&mut nets, &batch, &h, &mut opt).unwrap();
            let after = actor_objective_and_grad(&nets, &batch, false).unwrap().0;
            assert!(after >= before, "{before} → {after}");
        }
    }

    #[test]
    fn soft_update_converges_on_schedule() {
        let h = small_hyper();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let online = Mlp::init(3, &h.critic_specs(), None, &mut rng).unwrap();
        let mut target = Mlp::init(3, &h.critic_specs(), None, &mut rng).unwrap();
        let delta0 = online
            .flat_params()
            .iter()
            .zip(target.flat_params())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let eta = 0.05;
        let predicted = soft_update_steps(delta0, 1e-6, eta);
        let mut steps: usize = 0;
        loop {
            let d = online
                .flat_params()
                .iter()
                .zip(target.flat_params())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if d < 1e-6 {
                break;
            }
            target.soft_update_from(&online, eta).unwrap();
            steps += 1;
        }
        assert!(steps.abs_diff(predicted) <= 1, "{steps} vs {predicted}");
    }

    #[test]
    fn warmup_gate() {
        let sc = small_scenario(2, 4, 1);
        let h = AgentHyper {
            warmup: 5,
            ..small_hyper()
        };
        let ep = EpisodeConfig {
            episodes: 1,
            steps: 1,
            refresh: ChannelRefresh::PerEpisode,
        };
        let trainer = Trainer::new(sc, h, ep, 1).unwrap();
        let (agent, log) = trainer.run().unwrap();
        assert_eq!(agent.buffer.len(), 1);
        assert_eq!(agent.updates(), 0);
        assert_eq!(log.rows.len(), 1);
        assert!(log.rows[0].critic_loss_mean.is_nan());
    }

    #[test]
    fn targets_move_only_on_schedule() {
        let sc = small_scenario(2, 4, 1);
        let h = AgentHyper {
            target_period: 3,
            ..small_hyper()
        };
        let ep = EpisodeConfig {
            episodes: 1,
            steps: 8,
            refresh: ChannelRefresh::PerEpisode,
        };
        let mut t = Trainer::new(sc, h, ep, 2).unwrap();
        t.run_episode().unwrap();
        let mut rng = stream(2, Stream::Replay);
        let mut last = t.agent.nets.actor_target.param_hash();
        for _ in 0..9 {
            t.agent.learn(&mut rng).unwrap();
            let now = t.agent.nets.actor_target.param_hash();
            if t.agent.updates().is_multiple_of(3) {
                assert_ne!(now, last);
            } else {
                assert_eq!(now, last);
            }
            last = now;
        }
    }

    #[test]
    fn training_is_deterministic() {
        let sc = small_scenario(2, 4, 1);
        let ep = EpisodeConfig {
            episodes: 3,
            steps: 6,
            refresh: ChannelRefresh::PerEpisode,
        };
        let (a1, l1) = train(&sc, &small_hyper(), &ep, 11).unwrap();
        let (a2, l2) = train(&sc, &small_hyper(), &ep, 11).unwrap();
        assert_eq!(l1.to_csv(), l2.to_csv());
        assert_eq!(a1.nets, a2.nets);
        let (a3, _) = train(&sc, &small_hyper(), &ep, 12).unwrap();
        assert_ne!(a1.nets, a3.nets);
    }

    #[test]
    fn reward_normalizer_statistics() {
        let mut n = RewardNormalizer::default();
        for r in [1.0, 2.0, 3.0, 4.0] {
            n.observe(r);
        }
        // mean 2.5, sample std √(5/3)
        assert!((n.normalize(2.5)).abs() < 1e-15);
        assert!((n.normalize(4.0) - 1.5 / (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
