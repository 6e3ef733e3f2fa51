use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::a2c::{pick, A2c, ActionMode, BufferMode, Losses, PolicyParameters};
use super::{DecisionContext, RoutingPolicy, Transition};
use crate::error::{Error, Result};
use crate::features::{Action, ObservationMode};

/// Actor network used as a fixed policy (no learning).
pub struct NeuralPolicy {
    params: PolicyParameters,
    mode: ActionMode,
    view: ObservationMode,
    rng: ChaCha8Rng,
}

impl NeuralPolicy {
    pub fn new(params: PolicyParameters, view: ObservationMode, mode: ActionMode, rng: ChaCha8Rng) -> Self {
        Self { params, mode, view, rng }
    }
}

impl RoutingPolicy for NeuralPolicy {
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        let obs = ctx.observation;
        Ok(pick(&self.params.actor_forward(obs), &obs.mask, self.mode, &mut self.rng))
    }

    fn observation_mode(&self) -> ObservationMode {
        self.view
    }
}

/// Samples from the actor while collecting transitions, and runs an A2C
/// update every time a full minibatch is available.
pub struct A2cLearner {
    a2c: A2c,
    view: ObservationMode,
    rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    batch_size: usize,
    buffer_mode: BufferMode,
    replay_capacity: usize,
    buffer: VecDeque<Transition>,
    fresh: usize,
    loss_sum: Losses,
    loss_count: usize,
}

impl A2cLearner {
    pub fn new(
        params: PolicyParameters,
        view: ObservationMode,
        batch_size: usize,
        buffer_mode: BufferMode,
        replay_capacity: usize,
        rng: ChaCha8Rng,
        replay_rng: ChaCha8Rng,
    ) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::config("trainer.minibatch", "must be at least 1"));
        }
        if buffer_mode == BufferMode::UniformReplay && replay_capacity < batch_size {
            return Err(Error::config("trainer.replay_capacity", "must be at least the minibatch size"));
        }
        Ok(Self {
            a2c: A2c::new(params),
            view,
            rng,
            replay_rng,
            batch_size,
            buffer_mode,
            replay_capacity,
            buffer: VecDeque::new(),
            fresh: 0,
            loss_sum: Losses::default(),
            loss_count: 0,
        })
    }

    pub fn params(&self) -> &PolicyParameters {
        self.a2c.params()
    }

    pub fn into_params(self) -> PolicyParameters {
        self.a2c.into_params()
    }

    pub fn updates(&self) -> u64 {
        self.a2c.updates()
    }

    /// Mean losses since the last call, if any update ran.
    pub fn take_mean_losses(&mut self) -> Option<Losses> {
        if self.loss_count == 0 {
            return None;
        }
        let n = self.loss_count as f64;
        let out = Losses { actor: self.loss_sum.actor / n, critic: self.loss_sum.critic / n };
        self.loss_sum = Losses::default();
        self.loss_count = 0;
        Some(out)
    }

    fn train_step(&mut self, batch: &[Transition]) -> Result<()> {
        let l = self.a2c.update(batch)?;
        self.loss_sum.actor += l.actor;
        self.loss_sum.critic += l.critic;
        self.loss_count += 1;
        Ok(())
    }
}

impl RoutingPolicy for A2cLearner {
    fn select(&mut self, ctx: &DecisionContext<'_>) -> Result<Action> {
        let obs = ctx.observation;
        Ok(pick(&self.a2c.params().actor_forward(obs), &obs.mask, ActionMode::Sample, &mut self.rng))
    }

    fn observe(&mut self, transition: Transition) -> Result<()> {
        self.buffer.push_back(transition);
        match self.buffer_mode {
            BufferMode::Fifo => {
                if self.buffer.len() >= self.batch_size {
                    let batch: Vec<_> = self.buffer.drain(..self.batch_size).collect();
                    self.train_step(&batch)?;
                }
            }
            BufferMode::UniformReplay => {
                if self.buffer.len() > self.replay_capacity {
                    self.buffer.pop_front();
                }
                self.fresh += 1;
                if self.fresh >= self.batch_size && self.buffer.len() >= self.batch_size {
                    self.fresh = 0;
                    let batch: Vec<_> = (0..self.batch_size)
                        .map(|_| self.buffer[self.replay_rng.gen_range(0..self.buffer.len())].clone())
                        .collect();
                    self.train_step(&batch)?;
                }
            }
        }
        Ok(())
    }

    fn observation_mode(&self) -> ObservationMode {
        self.view
    }
}
