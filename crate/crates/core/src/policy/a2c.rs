//! Advantage actor-critic with a masked softmax actor.
//!
//! For a minibatch `M` of transitions the actor minimises
//! `-(1/|M|) * sum log pi(a|s) * W` and the critic minimises
//! `(1/(2|M|)) * sum (R - V(s))^2`, where `R = r + gamma * V'(s') * (1 - done)`
//! and `W = R - V(s)`. `R` is a fixed target: no gradient flows through `V'`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{ForwardCache, Mlp};
use super::Transition;
use crate::error::{Error, Result};
use crate::features::{Action, Observation, ACTION_COUNT, OBSERVATION_WIDTH};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Source of the bootstrap value `V'(s')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The current critic, treated as a constant.
    StopGradient,
    /// A copy of the critic refreshed every `target_sync_interval` updates.
    LaggedCopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BufferMode {
    /// Transitions are consumed in arrival order, each exactly once.
    Fifo,
    /// Minibatches are drawn uniformly from a bounded replay memory.
    UniformReplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub entropy_coef: f64,
    pub target: TargetMode,
    pub target_sync_interval: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 2e-4,
            critic_lr: 5e-4,
            hidden: vec![64, 64],
            optimizer: OptimizerKind::Sgd,
            entropy_coef: 0.0,
            target: TargetMode::StopGradient,
            target_sync_interval: 100,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("trainer.gamma", "must lie in [0, 1]"));
        }
        if !(self.actor_lr.is_finite() && self.actor_lr > 0.0) {
            return Err(Error::config("trainer.actor_lr", "must be positive"));
        }
        if !(self.critic_lr.is_finite() && self.critic_lr > 0.0) {
            return Err(Error::config("trainer.critic_lr", "must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("trainer.hidden", "layer widths must be positive"));
        }
        if !(self.entropy_coef.is_finite() && self.entropy_coef >= 0.0) {
            return Err(Error::config("trainer.entropy_coef", "must be non-negative"));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("trainer.target_sync_interval", "must be at least 1"));
        }
        Ok(())
    }

    pub fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBSERVATION_WIDTH];
        s.extend(&self.hidden);
        s.push(ACTION_COUNT);
        s
    }

    pub fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBSERVATION_WIDTH];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

/// Actor and critic weights plus the hyperparameters they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParameters {
    pub actor: Mlp,
    pub critic: Mlp,
    pub hyper: Hyperparameters,
}

impl PolicyParameters {
    pub fn new(hyper: Hyperparameters, init_seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = seed::rng(init_seed, Stream::Init, &[]);
        let actor = Mlp::init_uniform(&hyper.actor_sizes(), &mut rng);
        let critic = Mlp::init_uniform(&hyper.critic_sizes(), &mut rng);
        Ok(Self { actor, critic, hyper })
    }

    pub fn from_parts(actor: Mlp, critic: Mlp, hyper: Hyperparameters) -> Result<Self> {
        let p = Self { actor, critic, hyper };
        p.check_shapes()?;
        Ok(p)
    }

    pub fn check_shapes(&self) -> Result<()> {
        if self.actor.sizes() != self.hyper.actor_sizes().as_slice() {
            return Err(Error::Checkpoint(format!(
                "actor shape {:?} does not match expected {:?}",
                self.actor.sizes(),
                self.hyper.actor_sizes()
            )));
        }
        if self.critic.sizes() != self.hyper.critic_sizes().as_slice() {
            return Err(Error::Checkpoint(format!(
                "critic shape {:?} does not match expected {:?}",
                self.critic.sizes(),
                self.hyper.critic_sizes()
            )));
        }
        Ok(())
    }

    pub fn actor_logits(&self, obs: &Observation) -> [f64; ACTION_COUNT] {
        let out = self.actor.forward(&obs.features);
        let mut z = [0.0; ACTION_COUNT];
        z.copy_from_slice(&out);
        z
    }

    /// Masked action distribution: invalid entries are exactly zero.
    pub fn actor_forward(&self, obs: &Observation) -> [f64; ACTION_COUNT] {
        masked_softmax(&self.actor_logits(obs), &obs.mask)
    }

    pub fn critic_forward(&self, obs: &Observation) -> f64 {
        self.critic.forward(&obs.features)[0]
    }
}

/// Softmax restricted to the entries where `mask` is true.
pub fn masked_softmax(logits: &[f64; ACTION_COUNT], mask: &[bool; ACTION_COUNT]) -> [f64; ACTION_COUNT] {
    assert!(mask.iter().any(|&m| m), "mask admits no action");
    let max = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(z, _)| *z).fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; ACTION_COUNT];
    let mut sum = 0.0;
    for k in 0..ACTION_COUNT {
        if mask[k] {
            p[k] = (logits[k] - max).exp();
            sum += p[k];
        }
    }
    for v in &mut p {
        *v /= sum;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    Sample,
    Greedy,
}

/// Draws from (or takes the mode of) the masked distribution. Greedy ties
/// go to the lowest action index.
pub fn select_action<R: Rng + ?Sized>(
    params: &PolicyParameters,
    obs: &Observation,
    mode: ActionMode,
    rng: &mut R,
) -> Action {
    pick(&params.actor_forward(obs), &obs.mask, mode, rng)
}

pub(crate) fn pick<R: Rng + ?Sized>(
    probs: &[f64; ACTION_COUNT],
    mask: &[bool; ACTION_COUNT],
    mode: ActionMode,
    rng: &mut R,
) -> Action {
    let valid = (0..ACTION_COUNT).filter(|&k| mask[k]);
    let k = match mode {
        ActionMode::Greedy => valid.fold(None, |best: Option<usize>, k| match best {
            Some(b) if probs[b] >= probs[k] => Some(b),
            _ => Some(k),
        }),
        ActionMode::Sample => {
            let mut u: f64 = rng.gen();
            let mut last = None;
            let mut chosen = None;
            for k in valid {
                last = Some(k);
                if u < probs[k] {
                    chosen = Some(k);
                    break;
                }
                u -= probs[k];
            }
            chosen.or(last)
        }
    };
    Action::from_index(k.expect("mask admits no action")).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdTarget {
    /// Bootstrapped return `R`.
    pub target: f64,
    /// Current critic estimate `V(s)`.
    pub value: f64,
    /// Temporal-difference error `W = R - V(s)`.
    pub advantage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Losses {
    pub actor: f64,
    pub critic: f64,
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Gradients of both losses for one minibatch.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub actor: Vec<f64>,
    pub critic: Vec<f64>,
    pub losses: Losses,
    pub targets: Vec<TdTarget>,
}

/// Parameters plus optimiser state: the single writer of a training run.
#[derive(Debug, Clone)]
pub struct A2c {
    params: PolicyParameters,
    target_critic: Option<Mlp>,
    actor_adam: Option<Adam>,
    critic_adam: Option<Adam>,
    updates: u64,
}

impl A2c {
    pub fn new(params: PolicyParameters) -> Self {
        let target_critic = (params.hyper.target == TargetMode::LaggedCopy).then(|| params.critic.clone());
        let (actor_adam, critic_adam) = match params.hyper.optimizer {
            OptimizerKind::Adam => {
                (Some(Adam::new(params.actor.params().len())), Some(Adam::new(params.critic.params().len())))
            }
            OptimizerKind::Sgd => (None, None),
        };
        Self { params, target_critic, actor_adam, critic_adam, updates: 0 }
    }

    pub fn params(&self) -> &PolicyParameters {
        &self.params
    }

    pub fn into_params(self) -> PolicyParameters {
        self.params
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn bootstrap_critic(&self) -> &Mlp {
        self.target_critic.as_ref().unwrap_or(&self.params.critic)
    }

    pub fn td_targets(&self, batch: &[Transition]) -> Vec<TdTarget> {
        let gamma = self.params.hyper.gamma;
        let boot = self.bootstrap_critic();
        batch
            .iter()
            .map(|t| {
                let next = if t.done { 0.0 } else { boot.forward(&t.next_state.features)[0] };
                let target = t.reward + gamma * next;
                let value = self.params.critic.forward(&t.state.features)[0];
                TdTarget { target, value, advantage: target - value }
            })
            .collect()
    }

    /// Analytic gradients of the actor and critic losses at the current
    /// parameters, with `R` and `W` held fixed.
    pub fn gradients(&self, batch: &[Transition]) -> Gradients {
        let m = batch.len() as f64;
        let targets = self.td_targets(batch);
        let beta = self.params.hyper.entropy_coef;
        let mut ga = vec![0.0; self.params.actor.params().len()];
        let mut gc = vec![0.0; self.params.critic.params().len()];
        let mut losses = Losses::default();
        let mut cache = ForwardCache::default();

        for (t, td) in batch.iter().zip(&targets) {
            let out = self.params.actor.forward_cached(&t.state.features, &mut cache);
            let mut logits = [0.0; ACTION_COUNT];
            logits.copy_from_slice(out);
            let p = masked_softmax(&logits, &t.state.mask);
            let a = t.action.index();
            losses.actor -= p[a].ln() * td.advantage / m;

            let mut d_logits = [0.0; ACTION_COUNT];
            let entropy: f64 = (0..ACTION_COUNT).filter(|&k| t.state.mask[k]).map(|k| -p[k] * p[k].ln()).sum();
            for k in 0..ACTION_COUNT {
                if !t.state.mask[k] {
                    continue;
                }
                let indicator = if k == a { 1.0 } else { 0.0 };
                d_logits[k] = -(td.advantage / m) * (indicator - p[k]);
                if beta > 0.0 {
                    // d(-beta * H / m)/dz_k = beta * p_k * (ln p_k + H) / m
                    d_logits[k] += beta * p[k] * (p[k].ln() + entropy) / m;
                }
            }
            if beta > 0.0 {
                losses.actor -= beta * entropy / m;
            }
            self.params.actor.backward(&cache, &d_logits, &mut ga);

            self.params.critic.forward_cached(&t.state.features, &mut cache);
            let err = td.target - td.value;
            losses.critic += err * err / (2.0 * m);
            self.params.critic.backward(&cache, &[-err / m], &mut gc);
        }
        Gradients { actor: ga, critic: gc, losses, targets }
    }

    /// One optimisation step on both networks.
    pub fn update(&mut self, batch: &[Transition]) -> Result<Losses> {
        if batch.is_empty() {
            return Err(Error::Training("empty minibatch".into()));
        }
        if let Some(bad) = batch.iter().find(|t| !t.state.is_valid(t.action)) {
            return Err(Error::Contract(format!("minibatch action {:?} was masked out", bad.action)));
        }
        let g = self.gradients(batch);
        let finite = g.losses.actor.is_finite()
            && g.losses.critic.is_finite()
            && g.actor.iter().chain(&g.critic).all(|x| x.is_finite());
        if !finite {
            let (lo, hi) = batch
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t.reward), hi.max(t.reward)));
            return Err(Error::Training(format!(
                "non-finite loss or gradient at update {} (actor loss {}, critic loss {}, rewards in [{lo}, {hi}])",
                self.updates, g.losses.actor, g.losses.critic
            )));
        }
        let (alr, clr) = (self.params.hyper.actor_lr, self.params.hyper.critic_lr);
        match (&mut self.actor_adam, &mut self.critic_adam) {
            (Some(aa), Some(ca)) => {
                aa.step(self.params.actor.params_mut(), &g.actor, alr);
                ca.step(self.params.critic.params_mut(), &g.critic, clr);
            }
            _ => {
                for (p, d) in self.params.actor.params_mut().iter_mut().zip(&g.actor) {
                    *p -= alr * d;
                }
                for (p, d) in self.params.critic.params_mut().iter_mut().zip(&g.critic) {
                    *p -= clr * d;
                }
            }
        }
        self.updates += 1;
        if let Some(tc) = &mut self.target_critic {
            if self.updates.is_multiple_of(self.params.hyper.target_sync_interval as u64) {
                *tc = self.params.critic.clone();
            }
        }
        if self.params.actor.params().iter().chain(self.params.critic.params()).any(|x| !x.is_finite()) {
            return Err(Error::Training(format!("parameters became non-finite at update {}", self.updates)));
        }
        Ok(g.losses)
    }
}
