//! The beamforming MDP.
//!
//! Observation layout (length `2K + A + 2NM + 2NK`, `A = 2MK + N`):
//!
//! | slice                | length | contents                                   |
//! |----------------------|--------|--------------------------------------------|
//! | transmit power       | K      | `‖w_k‖²` of the previous action            |
//! | received power       | K      | `|h_k w_k|²` of the previous action        |
//! | previous action      | A      | the raw action vector                      |
//! | `G_TR` real, imag    | 2NM    | real parts row-major, then imaginary parts |
//! | `g_RK` real, imag    | 2NK    | real parts of `g_1..g_K`, then imaginary   |
//!
//! Action layout (length `A`): `Re(W)` row-major (MK), `Im(W)` row-major (MK),
//! then one entry per RIS element mapped to a phase `θ = π (a + 1)`.

use std::f64::consts::PI;
use std::ops::Range;

use crate::channel::{ChannelModel, ChannelParams, ChannelRealization, Geometry};
use crate::error::{Error, Result};
use crate::linalg::{diag_from_phases, wrap_phase, CMatrix, Complex};
use crate::rng::SimRng;
use crate::system::{project_power, Beamformer, InnerProduct, LinkBudget, NoiseModel, SystemDims};

/// How raw precoder entries in `[-1, 1]` are scaled before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionScaling {
    /// `sqrt(P_max / (2MK))` per real component: the all-ones action has
    /// exactly `P_max` total power.
    #[default]
    PerEntry,
    /// `sqrt(P_max)` per real component; the projection does the rest.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dims: SystemDims,
    pub geometry: Geometry,
    pub channel: ChannelParams,
    pub noise: NoiseModel,
    pub p_max: f64,
    pub inner_product: InnerProduct,
    pub action_scaling: ActionScaling,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        SystemDims::new(self.dims.m, self.dims.n, self.dims.k)?;
        self.noise.validate(self.dims.k)?;
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::config("scenario.p_max", "p_max > 0 required"));
        }
        ChannelModel::new(&self.geometry, &self.channel, self.dims)?;
        Ok(())
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::new(&self.geometry, &self.channel, self.dims)
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout { dims: self.dims }
    }

    fn w_scale(&self) -> f64 {
        match self.action_scaling {
            ActionScaling::PerEntry => (self.p_max / (2 * self.dims.m * self.dims.k) as f64).sqrt(),
            ActionScaling::Full => self.p_max.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelRefresh {
    /// Redrawn at every reset, fixed within an episode.
    #[default]
    PerEpisode,
    /// Redrawn after every step.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeConfig {
    pub episodes: usize,
    pub steps: usize,
    pub refresh: ChannelRefresh,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episode.episodes", "E ≥ 1 required"));
        }
        if self.steps == 0 {
            return Err(Error::config("episode.steps", "T ≥ 1 required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub dims: SystemDims,
}

impl StateLayout {
    pub fn len(&self) -> usize {
        self.dims.state_dim()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tx_power(&self) -> Range<usize> {
        0..self.dims.k
    }

    pub fn rx_power(&self) -> Range<usize> {
        self.dims.k..2 * self.dims.k
    }

    pub fn prev_action(&self) -> Range<usize> {
        let start = 2 * self.dims.k;
        start..start + self.dims.action_dim()
    }

    pub fn g_tr(&self) -> Range<usize> {
        let start = self.prev_action().end;
        start..start + 2 * self.dims.n * self.dims.m
    }

    pub fn g_rk(&self) -> Range<usize> {
        let start = self.g_tr().end;
        start..start + 2 * self.dims.n * self.dims.k
    }

    /// Writes the channel slices of `state`.
    pub fn write_channels(&self, state: &mut [f64], real: &ChannelRealization) {
        let g = &mut state[self.g_tr()];
        let nm = self.dims.n * self.dims.m;
        for (i, z) in real.g_tr.data().iter().enumerate() {
            g[i] = z.re;
            g[nm + i] = z.im;
        }
        let g = &mut state[self.g_rk()];
        let nk = self.dims.n * self.dims.k;
        for (k, col) in real.g_rk.iter().enumerate() {
            for (i, z) in col.data().iter().enumerate() {
                g[k * self.dims.n + i] = z.re;
                g[nk + k * self.dims.n + i] = z.im;
            }
        }
    }
}

/// Precoder and phase matrix obtained from a raw action.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAction {
    pub w: Beamformer,
    /// Phases in `[0, 2π)`.
    pub theta: Vec<f64>,
    pub phi: CMatrix,
}

/// Maps a raw action onto a feasible `(W, φ)` pair.
///
/// Components are clamped to `[-1, 1]`. The precoder is scaled and then
/// projected onto the power ball; phases are wrapped into `[0, 2π)`.
pub fn decode_action(action: &[f64], scenario: &Scenario) -> Result<DecodedAction> {
    let dims = scenario.dims;
    let a_dim = dims.action_dim();
    if action.len() != a_dim {
        return Err(Error::Shape {
            op: "decode_action",
            left: (action.len(), 1),
            right: (a_dim, 1),
        });
    }
    if action.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("action"));
    }
    let mk = dims.m * dims.k;
    let s = scenario.w_scale();
    let clamp = |v: f64| v.clamp(-1.0, 1.0);
    let raw = CMatrix::from_fn(dims.m, dims.k, |r, c| {
        let i = r * dims.k + c;
        Complex::new(clamp(action[i]) * s, clamp(action[mk + i]) * s)
    });
    let w = project_power(&Beamformer::new(raw), scenario.p_max)?;
    let theta: Vec<f64> = action[2 * mk..]
        .iter()
        .map(|&v| wrap_phase(PI * (clamp(v) + 1.0)))
        .collect();
    let phi = diag_from_phases(&theta)?;
    Ok(DecodedAction { w, theta, phi })
}

/// Inverse of the phase part of [`decode_action`].
pub fn encode_phase(theta: f64) -> f64 {
    wrap_phase(theta) / PI - 1.0
}

/// Checks both feasibility constraints on a decoded action.
pub fn is_feasible(decoded: &DecodedAction, p_max: f64) -> bool {
    let n = decoded.phi.rows();
    decoded.w.power() <= p_max + 1e-9
        && (0..n).all(|i| (decoded.phi[(i, i)].norm() - 1.0).abs() <= 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Per-user SINR under the submitted action.
    pub sinr: Vec<f64>,
}

/// One environment instance. Owns the channel random stream.
#[derive(Debug, Clone)]
pub struct Env {
    scenario: Scenario,
    model: ChannelModel,
    refresh: ChannelRefresh,
    rng: SimRng,
    realization: ChannelRealization,
    state: Vec<f64>,
    steps: usize,
}

impl Env {
    pub fn new(scenario: Scenario, refresh: ChannelRefresh, mut rng: SimRng) -> Result<Self> {
        scenario.validate()?;
        let model = scenario.channel_model()?;
        let realization = model.sample(&mut rng);
        let state = vec![0.0; scenario.dims.state_dim()];
        let mut env = Self {
            scenario,
            model,
            refresh,
            rng,
            realization,
            state,
            steps: 0,
        };
        env.reset_state();
        Ok(env)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    pub fn realization(&self) -> &ChannelRealization {
        &self.realization
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state_dim(&self) -> usize {
        self.scenario.dims.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.scenario.dims.action_dim()
    }

    fn reset_state(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
        self.scenario
            .layout()
            .write_channels(&mut self.state, &self.realization);
        self.steps = 0;
    }

    /// Draws a fresh channel and returns the first observation.
    pub fn reset(&mut self) -> Vec<f64> {
        self.realization = self.model.sample(&mut self.rng);
        self.reset_state();
        self.state.clone()
    }

    /// Sum-rate of a feasible `(W, φ)` on the current channel.
    pub fn link_budget(&self, w: &Beamformer, phi: &CMatrix) -> Result<LinkBudget> {
        LinkBudget::new(
            &self.realization,
            phi,
            w,
            &self.scenario.noise,
            self.scenario.inner_product,
        )
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let decoded = decode_action(action, &self.scenario)?;
        debug_assert!(is_feasible(&decoded, self.scenario.p_max));
        self.step_decoded(action, &decoded)
    }

    /// Steps with an already decoded `(W, φ)`; `action` is recorded in the
    /// previous-action slice.
    pub fn step_decoded(&mut self, action: &[f64], decoded: &DecodedAction) -> Result<StepOutcome> {
        if action.len() != self.action_dim() {
            return Err(Error::Shape {
                op: "Env::step",
                left: (action.len(), 1),
                right: (self.action_dim(), 1),
            });
        }
        let budget = self.link_budget(&decoded.w, &decoded.phi)?;
        let k_users = self.scenario.dims.k;
        let sinr = (0..k_users)
            .map(|k| budget.sinr(k))
            .collect::<Result<Vec<_>>>()?;
        let reward = budget.sum_rate();
        if !reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }

        let layout = self.scenario.layout();
        for k in 0..k_users {
            self.state[layout.tx_power()][k] = decoded.w.user_power(k);
            self.state[layout.rx_power()][k] = budget.signal_power(k);
        }
        self.state[layout.prev_action()].copy_from_slice(action);
        if self.refresh == ChannelRefresh::PerStep {
            self.realization = self.model.sample(&mut self.rng);
            layout.write_channels(&mut self.state, &self.realization);
        }
        self.steps += 1;
        Ok(StepOutcome {
            next_state: self.state.clone(),
            reward,
            sinr,
        })
    }
}
