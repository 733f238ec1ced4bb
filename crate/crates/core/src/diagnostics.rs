//! Self-checks exposed by the command line: empirical channel moments and
//! finite-difference gradient checks of the agent's networks and losses.

use rand::Rng;

use crate::agent::{actor_objective_and_grad, critic_loss_and_grad, AgentHyper, AgentNets};
use crate::baselines::random_policy;
use crate::env::{Env, Experience, Scenario};
use crate::error::Result;
use crate::linalg::{CMatrix, Complex};
use crate::neural::{
    check_coordinates, gradient_check, select_coordinates, tensor_sizes, Batch, GradCheckOptions,
    GradCheckReport, LossSpec, Probe,
};
use crate::rng::{stream, Stream};

/// One measured moment against its model value.
#[derive(Debug, Clone, PartialEq)]
pub struct StatCheck {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    /// Allowed relative deviation.
    pub tolerance: f64,
}

impl StatCheck {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.expected).abs() / self.expected.abs()
    }

    pub fn passed(&self) -> bool {
        self.relative_error() <= self.tolerance
    }
}

#[derive(Default)]
struct Moments {
    total: f64,
    scattered: f64,
    count: f64,
}

impl Moments {
    fn add(&mut self, sample: &CMatrix, mean: &CMatrix) {
        for (z, m) in sample.data().iter().zip(mean.data()) {
            self.total += z.norm_sqr();
            self.scattered += (z - m).norm_sqr();
        }
        self.count += sample.data().len() as f64;
    }
}

/// Empirical per-entry power and LoS/NLoS power split of every link over
/// `draws` channel realisations.
pub fn channel_stats(
    scenario: &Scenario,
    draws: usize,
    seed: u64,
    tolerance: f64,
) -> Result<Vec<StatCheck>> {
    let model = scenario.channel_model()?;
    let mut rng = stream(seed, Stream::Channel);
    let k_users = scenario.dims.k;
    let mean_tr = model.mean_tr();
    let mean_rk: Vec<CMatrix> = (0..k_users).map(|k| model.mean_rk(k)).collect();
    let mut tr = Moments::default();
    let mut rk: Vec<Moments> = (0..k_users).map(|_| Moments::default()).collect();
    let mut nlos_mean = Complex::new(0.0, 0.0);
    for _ in 0..draws {
        let real = model.sample(&mut rng);
        tr.add(&real.g_tr, &mean_tr);
        for (k, m) in rk.iter_mut().enumerate() {
            m.add(&real.g_rk[k], &mean_rk[k]);
        }
        nlos_mean += real.g_tr.data()[0] - mean_tr.data()[0];
    }
    let (los_w, nlos_w) = model_weights(scenario);
    let mut checks = Vec::new();
    let mut push_link = |label: String, m: &Moments, prefactor: f64| {
        let power = m.total / m.count;
        let scattered = m.scattered / m.count;
        checks.push(StatCheck {
            name: format!("{label} E|entry|^2"),
            measured: power,
            expected: prefactor * prefactor,
            tolerance,
        });
        if los_w > 0.0 {
            checks.push(StatCheck {
                name: format!("{label} LoS power fraction"),
                measured: (power - scattered) / power,
                expected: los_w * los_w,
                tolerance,
            });
        }
        if nlos_w > 0.0 {
            checks.push(StatCheck {
                name: format!("{label} NLoS power fraction"),
                measured: scattered / power,
                expected: nlos_w * nlos_w,
                tolerance,
            });
        }
    };
    push_link("G_TR".into(), &tr, model.tr_prefactor());
    for (k, m) in rk.iter().enumerate() {
        push_link(format!("g_{}", k + 1), m, model.rk_prefactor(k));
    }
    // scattered part is zero-mean: |mean| small against its std
    let std = nlos_w * model.tr_prefactor() / (draws as f64).sqrt();
    if std > 0.0 {
        checks.push(StatCheck {
            name: "G_TR[0,0] NLoS mean / (5 std of the mean)".into(),
            measured: (nlos_mean / draws as f64).norm() / (5.0 * std),
            expected: 1.0,
            tolerance: 1.0,
        });
    }
    Ok(checks)
}

fn model_weights(scenario: &Scenario) -> (f64, f64) {
    scenario.channel.mixture_weights()
}

/// Result of one gradient check in the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub seed: u64,
    pub target: &'static str,
    pub report: GradCheckReport,
}

/// Transitions gathered by driving the environment with random actions.
pub fn sample_transitions(scenario: &Scenario, n: usize, seed: u64) -> Result<Vec<Experience>> {
    let mut env = Env::new(
        scenario.clone(),
        Default::default(),
        stream(seed, Stream::Channel),
    )?;
    let mut rng = stream(seed, Stream::Policy);
    let mut state = env.reset();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let action = random_policy(scenario, &mut rng);
        let step = env.step(&action)?;
        out.push(Experience {
            state,
            action,
            reward: step.reward,
            next_state: step.next_state.clone(),
        });
        state = step.next_state;
    }
    Ok(out)
}

/// Finite-difference check of the mean-squared TD loss with respect to the
/// online critic.
pub fn check_critic_loss(
    nets: &AgentNets,
    batch: &[Experience],
    gamma: f64,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, grads) = critic_loss_and_grad(nets, batch, gamma)?;
    let mut rng = stream(options.seed, Stream::Evaluation);
    let coords = select_coordinates(&tensor_sizes(&nets.critic), options.per_tensor, &mut rng);
    let inputs: Vec<Vec<f64>> = batch
        .iter()
        .map(|e| [e.state.as_slice(), &e.action].concat())
        .collect();
    let inputs = Batch::from_rows(&inputs)?;
    let mut probe = nets.clone();
    Ok(check_coordinates(
        &nets.critic.flat_params(),
        &grads.flat(),
        &coords,
        options.step,
        |p| {
            probe.critic.set_flat_params(p).expect("same shape");
            let (_, cache) = probe.critic.forward_batch(&inputs).expect("same shape");
            Probe {
                value: critic_loss_and_grad(&probe, batch, gamma)
                    .expect("same shape")
                    .0,
                pattern: probe.critic.relu_pattern(&cache),
            }
        },
    ))
}

/// Finite-difference check of `−mean_s Q(s, μ(s))` with respect to the actor.
pub fn check_actor_objective(
    nets: &AgentNets,
    batch: &[Experience],
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (_, grads) = actor_objective_and_grad(nets, batch, false)?;
    let mut rng = stream(options.seed, Stream::Evaluation);
    let coords = select_coordinates(&tensor_sizes(&nets.actor), options.per_tensor, &mut rng);
    let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
    let states = Batch::from_rows(&states)?;
    let mut probe = nets.clone();
    Ok(check_coordinates(
        &nets.actor.flat_params(),
        &grads.flat(),
        &coords,
        options.step,
        |p| {
            probe.actor.set_flat_params(p).expect("same shape");
            let (actions, ac) = probe.actor.forward_batch(&states).expect("same shape");
            let (_, cc) = probe
                .critic
                .forward_batch(&Batch::hcat(&states, &actions).expect("same rows"))
                .expect("same shape");
            Probe {
                value: -actor_objective_and_grad(&probe, batch, false)
                    .expect("same shape")
                    .0,
                pattern: probe.actor.relu_pattern(&ac)
                    ^ probe.critic.relu_pattern(&cc).rotate_left(17),
            }
        },
    ))
}

/// Actor, critic, 1-sample critic loss and composed actor objective checks
/// for every seed, on freshly initialised networks and environment states.
pub fn gradcheck_suite(
    scenario: &Scenario,
    hyper: &AgentHyper,
    seeds: impl IntoIterator<Item = u64>,
    options: GradCheckOptions,
) -> Result<Vec<GradCheckRow>> {
    let mut rows = Vec::new();
    for seed in seeds {
        let mut rng = stream(seed, Stream::Init);
        let nets = AgentNets::init(
            scenario.dims.state_dim(),
            scenario.dims.action_dim(),
            hyper,
            &mut rng,
        )?;
        let batch = sample_transitions(scenario, 4, seed)?;
        let opts = GradCheckOptions { seed, ..options };
        let e = &batch[batch.len() - 1];

        let weights: Vec<f64> = (0..nets.action_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let report = gradient_check(&nets.actor, &e.state, &LossSpec::Linear { weights }, opts)?;
        rows.push(GradCheckRow {
            seed,
            target: "actor",
            report,
        });

        let input = [e.state.as_slice(), &e.action].concat();
        let loss = LossSpec::Quadratic {
            target: vec![e.reward],
        };
        let report = gradient_check(&nets.critic, &input, &loss, opts)?;
        rows.push(GradCheckRow {
            seed,
            target: "critic",
            report,
        });

        let report = check_critic_loss(&nets, std::slice::from_ref(e), hyper.gamma, opts)?;
        rows.push(GradCheckRow {
            seed,
            target: "critic_loss",
            report,
        });

        let report = check_actor_objective(&nets, &batch, opts)?;
        rows.push(GradCheckRow {
            seed,
            target: "actor_objective",
            report,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tests::small_scenario;

    #[test]
    fn stats_on_small_scenario() {
        let sc = small_scenario(2, 4, 1);
        let checks = channel_stats(&sc, 20_000, 3, 0.05).unwrap();
        assert!(checks.len() >= 7);
        for c in &checks {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn suite_on_small_nets() {
        let sc = small_scenario(2, 4, 1);
        let hyper = AgentHyper {
            actor_hidden: vec![12, 12],
            critic_hidden: vec![12, 12],
            actor_final_init: 0.3,
            ..AgentHyper::default()
        };
        let rows = gradcheck_suite(&sc, &hyper, 0..3, GradCheckOptions::default()).unwrap();
        assert_eq!(rows.len(), 12);
        for r in &rows {
            assert!(r.report.max_relative_error < 1e-4, "{r:?}");
            assert!(r.report.checked > 0);
        }
    }
}
