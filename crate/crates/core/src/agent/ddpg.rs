use std::f64::consts::PI;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::env::Environment;
use super::noise::{decay_noise, NoiseSchedule, OuNoise};
use super::replay::{ReplayMemory, Transition};
use super::reward::{Reward, RewardTracker};
use crate::array::{quantize_phases, PhaseCodebook, PhaseVector};
use crate::error::{Error, Result};
use crate::neural::{copy_into_target, Activation, Adam, AdamConfig, Architecture, Checkpoint, DenseNetwork, Gradients};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Hard target copy every this many iterations.
    pub target_sync_interval: u64,
    pub actor_learning_rate: f64,
    pub critic_learning_rate: f64,
    /// Hidden width as a multiple of the number of antennas.
    pub hidden_multiplier: usize,
    pub final_layer_init: f64,
    pub ou_theta: f64,
    pub ou_mu: f64,
    /// Initial OU volatility in radians; defaults to π.
    pub noise_start: Option<f64>,
    /// Final OU volatility in radians; defaults to an eighth of the codebook
    /// step, which keeps the residual exploration near one flipped element
    /// per iteration on a 32-element array.
    pub noise_end: Option<f64>,
    pub noise_decay_fraction: f64,
    /// Clip TD targets to `±1/(1 − γ)`, the largest attainable return.
    pub clip_targets: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            // The reward is relative to the previous gain, so any discounting
            // charges good states for the drop that must follow them.
            gamma: 0.0,
            batch_size: 64,
            replay_capacity: 100_000,
            target_sync_interval: 100,
            actor_learning_rate: 1e-3,
            critic_learning_rate: 1e-3,
            hidden_multiplier: 4,
            final_layer_init: 1e-3,
            ou_theta: 0.15,
            ou_mu: 0.0,
            noise_start: None,
            noise_end: None,
            noise_decay_fraction: 0.6,
            clip_targets: true,
        }
    }
}

impl AgentConfig {
    pub fn noise_schedule(&self, codebook: &PhaseCodebook) -> NoiseSchedule {
        NoiseSchedule {
            start: self.noise_start.unwrap_or(PI),
            end: self.noise_end.unwrap_or(codebook.step() / 8.0),
            decay_fraction: self.noise_decay_fraction,
        }
    }

    pub fn validate(&self, codebook: &PhaseCodebook) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config(format!(
                "replay capacity {} is smaller than the batch size {}",
                self.replay_capacity, self.batch_size
            )));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::Config("target sync interval must be positive".into()));
        }
        for (name, lr) in [
            ("actor", self.actor_learning_rate),
            ("critic", self.critic_learning_rate),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} learning rate must be positive, got {lr}")));
            }
        }
        if self.hidden_multiplier == 0 {
            return Err(Error::Config("hidden multiplier must be positive".into()));
        }
        if !(0.0..2.0).contains(&self.ou_theta) {
            return Err(Error::Config(format!("OU theta must be in [0, 2), got {}", self.ou_theta)));
        }
        self.noise_schedule(codebook).validate()
    }
}

/// Actor: `2M → hM → hM → M`, relu hidden, `π·tanh` output (predicted phases).
pub fn actor_architecture(num_antennas: usize, hidden_multiplier: usize) -> Architecture {
    let m = num_antennas;
    let h = hidden_multiplier * m;
    Architecture::new(
        vec![2 * m, h, h, m],
        vec![Activation::Relu, Activation::Relu, Activation::ScaledTanh { scale: PI }],
    )
    .expect("valid actor architecture")
}

/// Critic: `(2M state ‖ 2M action) → hM → hM → 1`, relu hidden, linear output.
pub fn critic_architecture(num_antennas: usize, hidden_multiplier: usize) -> Architecture {
    let m = num_antennas;
    let h = hidden_multiplier * m;
    Architecture::new(
        vec![4 * m, h, h, 1],
        vec![Activation::Relu, Activation::Relu, Activation::Linear],
    )
    .expect("valid critic architecture")
}

/// Writes `[cos θ_1 … cos θ_M, sin θ_1 … sin θ_M]` into `row`.
pub fn encode_phases_into(phases: &[f64], row: &mut [f64]) {
    let m = phases.len();
    debug_assert_eq!(row.len(), 2 * m);
    for (i, &p) in phases.iter().enumerate() {
        let (s, c) = p.sin_cos();
        row[i] = c;
        row[m + i] = s;
    }
}

pub fn encode_phases(phases: &[f64]) -> Vec<f64> {
    let mut row = vec![0.0; 2 * phases.len()];
    encode_phases_into(phases, &mut row);
    row
}

/// Inverse of [`encode_phases`]: `atan2(sin, cos)` per antenna.
pub fn decode_phases(encoded: &[f64]) -> Vec<f64> {
    let m = encoded.len() / 2;
    (0..m).map(|i| encoded[m + i].atan2(encoded[i])).collect()
}

fn encode_batch<'a>(rows: impl ExactSizeIterator<Item = &'a [f64]>, m: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), 2 * m));
    for (mut row, phases) in out.rows_mut().into_iter().zip(rows) {
        encode_phases_into(phases, row.as_slice_mut().expect("contiguous row"));
    }
    out
}

fn concat_columns(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("matching batch sizes")
}

/// Per-iteration record of the training loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: u64,
    pub reward: Reward,
    pub gain: f64,
    pub best_gain: f64,
    pub beta: f64,
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub sigma: f64,
    /// Codebook indices of the executed beam.
    pub action: Vec<u16>,
}

/// Wolpertinger-style DDPG agent with `k = 1` nearest-neighbour action projection.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    codebook: PhaseCodebook,
    num_antennas: usize,
    total_steps: u64,
    schedule: NoiseSchedule,
    actor: DenseNetwork,
    critic: DenseNetwork,
    target_actor: DenseNetwork,
    target_critic: DenseNetwork,
    actor_opt: Adam,
    critic_opt: Adam,
    replay: ReplayMemory,
    noise: OuNoise,
    tracker: RewardTracker,
    state: PhaseVector,
    noise_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    step: u64,
}

impl Agent {
    /// Initializes networks, targets, replay memory, noise and a random
    /// initial state drawn from the codebook.
    pub fn new(
        config: AgentConfig,
        codebook: PhaseCodebook,
        num_antennas: usize,
        total_steps: u64,
        seed: u64,
    ) -> Result<Self> {
        if num_antennas == 0 {
            return Err(Error::Config("agent needs at least one antenna".into()));
        }
        if total_steps == 0 {
            return Err(Error::Config("number of iterations must be positive".into()));
        }
        config.validate(&codebook)?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(1);
        let mut replay_rng = ChaCha8Rng::seed_from_u64(seed);
        replay_rng.set_stream(2);

        let actor = DenseNetwork::new(actor_architecture(num_antennas, config.hidden_multiplier), &mut init_rng)
            .with_final_layer_uniform(config.final_layer_init, &mut init_rng);
        let critic = DenseNetwork::new(critic_architecture(num_antennas, config.hidden_multiplier), &mut init_rng);
        let initial: Vec<usize> = (0..num_antennas)
            .map(|_| init_rng.random_range(0..codebook.len()))
            .collect();
        let state = PhaseVector::from_indices(&codebook, &initial)?;

        let schedule = config.noise_schedule(&codebook);
        let noise = OuNoise::new(num_antennas, config.ou_mu, config.ou_theta, schedule.start);
        Ok(Self {
            actor_opt: Adam::new(AdamConfig::with_learning_rate(config.actor_learning_rate), &actor),
            critic_opt: Adam::new(AdamConfig::with_learning_rate(config.critic_learning_rate), &critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            replay: ReplayMemory::new(config.replay_capacity)?,
            noise,
            tracker: RewardTracker::new(),
            state,
            noise_rng,
            replay_rng,
            step: 0,
            schedule,
            total_steps,
            num_antennas,
            codebook,
            config,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn codebook(&self) -> &PhaseCodebook {
        &self.codebook
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn state(&self) -> &PhaseVector {
        &self.state
    }

    pub fn tracker(&self) -> &RewardTracker {
        &self.tracker
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn noise(&self) -> &OuNoise {
        &self.noise
    }

    pub fn noise_mut(&mut self) -> &mut OuNoise {
        &mut self.noise
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn actor(&self) -> &DenseNetwork {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNetwork {
        &self.critic
    }

    pub fn target_actor(&self) -> &DenseNetwork {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &DenseNetwork {
        &self.target_critic
    }

    fn check_replacement(current: &DenseNetwork, replacement: &DenseNetwork, what: &str) -> Result<()> {
        if current.input_dim() != replacement.input_dim() || current.output_dim() != replacement.output_dim() {
            return Err(Error::Usage(format!(
                "{what} replacement must map {} inputs to {} outputs",
                current.input_dim(),
                current.output_dim()
            )));
        }
        Ok(())
    }

    /// Swaps in a different actor (and a fresh optimizer state for it).
    pub fn replace_actor(&mut self, actor: DenseNetwork) -> Result<()> {
        Self::check_replacement(&self.actor, &actor, "actor")?;
        self.actor_opt = Adam::new(*self.actor_opt.config(), &actor);
        self.actor = actor;
        Ok(())
    }

    pub fn replace_critic(&mut self, critic: DenseNetwork) -> Result<()> {
        Self::check_replacement(&self.critic, &critic, "critic")?;
        self.critic_opt = Adam::new(*self.critic_opt.config(), &critic);
        self.critic = critic;
        Ok(())
    }

    pub fn replace_targets(&mut self, target_actor: DenseNetwork, target_critic: DenseNetwork) -> Result<()> {
        Self::check_replacement(&self.actor, &target_actor, "target actor")?;
        Self::check_replacement(&self.critic, &target_critic, "target critic")?;
        self.target_actor = target_actor;
        self.target_critic = target_critic;
        Ok(())
    }

    /// Copies online parameters into the target networks.
    pub fn sync_targets(&mut self) -> Result<()> {
        copy_into_target(&self.actor, &mut self.target_actor)?;
        copy_into_target(&self.critic, &mut self.target_critic)
    }

    /// Actor prediction for one state, before noise.
    pub fn predict(&self, state: &PhaseVector) -> Result<Vec<f64>> {
        self.actor.predict_one(&encode_phases(state.phases()))
    }

    /// `quantize(wrap(μ(s) + noise))`.
    pub fn propose_with_noise(&self, state: &PhaseVector, noise: &[f64]) -> Result<PhaseVector> {
        if noise.len() != self.num_antennas {
            return Err(Error::Usage(format!(
                "noise has {} entries but the array has {} antennas",
                noise.len(),
                self.num_antennas
            )));
        }
        let predicted = self.predict(state)?;
        let noisy = PhaseVector::new(predicted.iter().zip(noise).map(|(p, n)| p + n).collect());
        Ok(quantize_phases(&noisy, &self.codebook))
    }

    /// Advances the OU process and proposes the next quantized action.
    pub fn propose_action(&mut self, state: &PhaseVector) -> Result<PhaseVector> {
        let noise = self.noise.ou_step(&mut self.noise_rng).to_vec();
        self.propose_with_noise(state, &noise)
    }

    fn check_batch(&self, batch: &[&Transition]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Usage("empty minibatch".into()));
        }
        if let Some(bad) = batch.iter().find(|t| {
            t.state.len() != self.num_antennas
                || t.action.len() != self.num_antennas
                || t.next_state.len() != self.num_antennas
        }) {
            return Err(Error::Usage(format!(
                "transition dimension {} does not match {} antennas",
                bad.state.len(),
                self.num_antennas
            )));
        }
        Ok(())
    }

    /// `y_b = r_b + γ Q'(s_{b+1}, μ'(s_{b+1}))`; the task has no terminal states.
    pub fn critic_target(&self, batch: &[&Transition]) -> Result<Array1<f64>> {
        self.check_batch(batch)?;
        let m = self.num_antennas;
        let next = encode_batch(batch.iter().map(|t| t.next_state.phases()), m);
        let next_actions = self.target_actor.predict(next.view())?;
        let next_actions_enc = encode_batch(next_actions.rows().into_iter().map(|r| r.to_slice().unwrap()), m);
        let q_next = self
            .target_critic
            .predict(concat_columns(next.view(), next_actions_enc.view()).view())?;
        let bound = if self.config.clip_targets {
            1.0 / (1.0 - self.config.gamma)
        } else {
            f64::INFINITY
        };
        let targets: Array1<f64> = batch
            .iter()
            .zip(q_next.column(0))
            .map(|(t, &q)| (t.reward.as_f64() + self.config.gamma * q).clamp(-bound, bound))
            .collect();
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("critic target".into()));
        }
        Ok(targets)
    }

    /// Mean squared TD loss and its gradient with respect to the critic.
    pub fn critic_gradients(&self, batch: &[&Transition], targets: &Array1<f64>) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        if targets.len() != batch.len() {
            return Err(Error::Usage("one target per transition required".into()));
        }
        let m = self.num_antennas;
        let states = encode_batch(batch.iter().map(|t| t.state.phases()), m);
        let actions = encode_batch(batch.iter().map(|t| t.action.phases()), m);
        let inputs = concat_columns(states.view(), actions.view());
        let (q, cache) = self.critic.forward(inputs.view())?;
        let b = batch.len() as f64;
        let residual = &q.column(0) - targets;
        let loss = residual.mapv(|r| r * r).sum() / b;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("critic loss {loss}")));
        }
        let upstream = residual.mapv(|r| 2.0 * r / b).insert_axis(Axis(1));
        let grads = self.critic.backward(&cache, upstream.view())?;
        Ok((loss, grads))
    }

    /// One optimizer step on the critic; returns the loss before the step.
    pub fn update_critic(&mut self, batch: &[&Transition], targets: &Array1<f64>) -> Result<f64> {
        let (loss, grads) = self.critic_gradients(batch, targets)?;
        self.critic_opt.apply_update(&mut self.critic, &grads)?;
        Ok(loss)
    }

    /// Policy objective `(1/B) Σ Q(s_b, μ(s_b))` and the gradient of its
    /// negation with respect to the actor, chained through the critic's action
    /// input and the `(cos, sin)` encoding.
    pub fn actor_gradients(&self, batch: &[&Transition]) -> Result<(f64, Gradients)> {
        self.check_batch(batch)?;
        let m = self.num_antennas;
        let states = encode_batch(batch.iter().map(|t| t.state.phases()), m);
        let (phases, actor_cache) = self.actor.forward(states.view())?;
        let actions = encode_batch(phases.rows().into_iter().map(|r| r.to_slice().unwrap()), m);
        let (q, critic_cache) = self.critic.forward(concat_columns(states.view(), actions.view()).view())?;
        let b = batch.len() as f64;
        let objective = q.sum() / b;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!("actor objective {objective}")));
        }
        // d(-objective)/dQ_b = -1/B.
        let upstream = Array2::from_elem((batch.len(), 1), -1.0 / b);
        let critic_grads = self.critic.backward(&critic_cache, upstream.view())?;
        let d_action = critic_grads.input.slice(s![.., 2 * m..]);
        let d_cos = d_action.slice(s![.., ..m]);
        let d_sin = d_action.slice(s![.., m..]);
        let mut d_phase = Array2::zeros((batch.len(), m));
        ndarray::Zip::from(&mut d_phase)
            .and(&phases)
            .and(&d_cos)
            .and(&d_sin)
            .for_each(|d, &theta, &dc, &ds| {
                let (s, c) = theta.sin_cos();
                *d = -s * dc + c * ds;
            });
        let grads = self.actor.backward(&actor_cache, d_phase.view())?;
        Ok((objective, grads))
    }

    /// One optimizer step ascending the critic's value of the actor's actions;
    /// returns the objective before the step.
    pub fn update_actor(&mut self, batch: &[&Transition]) -> Result<f64> {
        let (objective, grads) = self.actor_gradients(batch)?;
        self.actor_opt.apply_update(&mut self.actor, &grads)?;
        Ok(objective)
    }

    /// One iteration of the learning loop: propose, execute, score, store,
    /// learn (once a full minibatch exists) and periodically sync targets.
    pub fn agent_step<E: Environment + ?Sized>(&mut self, env: &mut E) -> Result<StepLog> {
        if env.num_antennas() != self.num_antennas {
            return Err(Error::Usage(format!(
                "environment has {} antennas but agent has {}",
                env.num_antennas(),
                self.num_antennas
            )));
        }
        self.step += 1;
        let t = self.step;
        decay_noise(&mut self.noise, &self.schedule, t, self.total_steps);

        let state = self.state.clone();
        let action = self.propose_action(&state)?;
        let gain = env.measure(&action)?;
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(Error::NonFinite(format!("measured gain {gain}")));
        }
        let reward = self.tracker.compute_reward(gain, &action);
        self.replay.push(Transition::new(state, action.clone(), reward));

        let mut critic_loss = None;
        let mut actor_objective = None;
        let batch_size = self.config.batch_size;
        if let Some(batch) = self.replay.sample(batch_size, &mut self.replay_rng) {
            // Cloned so the optimizer borrows below do not alias the replay memory.
            let batch: Vec<Transition> = batch.into_iter().cloned().collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let targets = self.critic_target(&refs)?;
            critic_loss = Some(self.update_critic(&refs, &targets)?);
            actor_objective = Some(self.update_actor(&refs)?);
        }
        if t % self.config.target_sync_interval == 0 {
            self.sync_targets()?;
        }

        let indices = action
            .indices(&self.codebook)
            .expect("quantized action")
            .into_iter()
            .map(|i| i as u16)
            .collect();
        self.state = action;
        Ok(StepLog {
            t,
            reward,
            gain,
            best_gain: self.tracker.best_gain(),
            beta: self.tracker.threshold(),
            critic_loss,
            actor_objective,
            sigma: self.noise.sigma(),
            action: indices,
        })
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            step: self.step,
            actor: Checkpoint::capture(&self.actor, Some(&self.actor_opt)),
            critic: Checkpoint::capture(&self.critic, Some(&self.critic_opt)),
            target_actor: Checkpoint::capture(&self.target_actor, None),
            target_critic: Checkpoint::capture(&self.target_critic, None),
            tracker: self.tracker.clone(),
            state: self.state.clone(),
        }
    }
}

/// Network checkpoints plus tracker and current state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub step: u64,
    pub actor: Checkpoint,
    pub critic: Checkpoint,
    pub target_actor: Checkpoint,
    pub target_critic: Checkpoint,
    pub tracker: RewardTracker,
    pub state: PhaseVector,
}

impl AgentCheckpoint {
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
