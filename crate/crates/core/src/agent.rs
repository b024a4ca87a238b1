//! Double-DQN agent: replay memory, epsilon-greedy policy, temporal
//! difference targets, and the training loop binding the network to the
//! circuit-growing environment.
//!
//! The action-value update is the double estimator: the online network
//! picks the next action, the separately held target network prices it.
//! The target network is refreshed by a hard copy every fixed number of
//! gradient steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::codec::CircuitTensor;
use crate::env::{StepOutcome, SykEnv};
use crate::error::{Error, Result};
use crate::nn::{huber, huber_grad, Adam, Network, NetworkSpec, Tensor};
use crate::rng::{mix64, streams, Rng};

/// Slope of the Huber loss transition between quadratic and linear.
pub const HUBER_DELTA: f64 = 1.0;

/// Exploration rate after `step` environment steps: `decay^step`, clamped
/// below by `floor`. Computed by binary exponentiation so late steps cost
/// O(log step).
pub fn epsilon_at(step: u64, decay: f64, floor: f64) -> f64 {
    let mut result = 1.0f64;
    let mut base = decay;
    let mut e = step;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result.max(floor)
}

/// One remembered interaction.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: CircuitTensor,
    pub state_energy: Option<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: CircuitTensor,
    pub next_energy: Option<f64>,
    pub done: bool,
}

/// Fixed-capacity FIFO experience store.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { slots: Vec::new(), capacity, next: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.slots[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.slots.iter()
    }

    /// Raw index the next insertion writes to; part of the buffer state a
    /// checkpoint must capture once the ring has wrapped.
    pub fn cursor(&self) -> usize {
        self.next
    }

    /// Restores the insertion cursor alongside re-pushed slot contents.
    pub fn set_cursor(&mut self, cursor: usize) -> Result<()> {
        let valid = if self.slots.len() < self.capacity {
            cursor == self.slots.len()
        } else {
            cursor < self.capacity
        };
        if !valid {
            return Err(Error::invalid("replay cursor inconsistent with buffer fill"));
        }
        self.next = cursor;
        Ok(())
    }

    /// Inserts, evicting the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Uniform sample of `k` distinct stored transitions.
    pub fn sample(&self, k: usize, rng: &mut Rng) -> Result<Vec<&Transition>> {
        if k > self.slots.len() {
            return Err(Error::invalid("sample larger than stored experience"));
        }
        let mut idx: Vec<usize> = (0..self.slots.len()).collect();
        rng.sample_prefix(&mut idx, k);
        Ok(idx[..k].iter().map(|&i| &self.slots[i]).collect())
    }
}

/// Anything that can price all actions of a state.
pub trait QFunction {
    fn q_values(&self, state: &CircuitTensor, energy: Option<f64>) -> Result<Vec<f64>>;
}

impl QFunction for Network {
    fn q_values(&self, state: &CircuitTensor, energy: Option<f64>) -> Result<Vec<f64>> {
        let out = self.forward(&state.to_network_input(energy))?;
        Ok(out.data().to_vec())
    }
}

/// Index of the best legal action, if any action is legal.
pub fn greedy_action(q: &[f64], legal: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(legal.iter()).enumerate() {
        if !ok {
            continue;
        }
        match best {
            Some(b) if q[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Epsilon-greedy draw over the legal actions.
pub fn select_action<Q: QFunction + ?Sized>(
    q: &Q,
    state: &CircuitTensor,
    energy: Option<f64>,
    legal: &[bool],
    epsilon: f64,
    rng: &mut Rng,
) -> Result<usize> {
    let legal_count = legal.iter().filter(|&&b| b).count();
    if legal_count == 0 {
        return Err(Error::invalid("no legal actions"));
    }
    if rng.next_f64() < epsilon {
        let pick = rng.next_index(legal_count);
        let choice = legal
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("count checked");
        return Ok(choice);
    }
    let values = q.q_values(state, energy)?;
    if values.len() != legal.len() {
        return Err(Error::DimensionMismatch { expected: legal.len(), got: values.len() });
    }
    greedy_action(&values, legal).ok_or_else(|| Error::invalid("no legal actions"))
}

/// Double-estimator target: the online values choose the next action, the
/// target values price it.
pub fn td_target(
    reward: f64,
    done: bool,
    gamma: f64,
    q_next_online: &[f64],
    q_next_target: &[f64],
    legal: &[bool],
) -> f64 {
    if done {
        return reward;
    }
    let a = greedy_action(q_next_online, legal).expect("environment always has legal actions");
    reward + gamma * q_next_target[a]
}

/// One training example: network input, the action taken, and its target.
#[derive(Debug, Clone)]
pub struct GradSample {
    pub input: Tensor,
    pub action: usize,
    pub target: f64,
}

/// Adds one sample's Huber loss gradient (scaled by `scale`) into `grads`
/// and returns the unscaled loss.
pub fn accumulate_sample(
    net: &Network,
    sample: &GradSample,
    scale: f64,
    grads: &mut [f64],
    dropout_rng: &mut Rng,
) -> Result<f64> {
    let (out, caches) = net.forward_train(&sample.input, dropout_rng)?;
    if sample.action >= out.numel() {
        return Err(Error::invalid("action index outside network output"));
    }
    let residual = out.data()[sample.action] - sample.target;
    let mut grad_out = Tensor::zeros(out.shape().to_vec());
    grad_out.data_mut()[sample.action] = scale * huber_grad(residual, HUBER_DELTA);
    net.backward(&caches, &grad_out, grads)?;
    Ok(huber(residual, HUBER_DELTA))
}

/// Strategy for evaluating a batch of gradient samples. The serial
/// implementation lives here; a multi-threaded one belongs to crates with
/// std available. Implementations must produce bitwise-identical results
/// regardless of execution order, which per-sample RNG streams guarantee.
pub trait GradExecutor {
    /// Returns the mean loss and the mean gradient over the batch.
    fn batch(&self, net: &Network, samples: &[GradSample], dropout_seed: u64)
        -> Result<(f64, Vec<f64>)>;
}

/// Single-threaded reference executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl GradExecutor for SerialExecutor {
    fn batch(
        &self,
        net: &Network,
        samples: &[GradSample],
        dropout_seed: u64,
    ) -> Result<(f64, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::invalid("empty gradient batch"));
        }
        let scale = 1.0 / samples.len() as f64;
        let mut grads = vec![0.0; net.param_count()];
        let mut total = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let mut rng = Rng::stream(dropout_seed, i as u64);
            total += accumulate_sample(net, s, scale, &mut grads, &mut rng)?;
        }
        Ok((total * scale, grads))
    }
}

/// Learning hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DdqnConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub memory_capacity: usize,
    /// Hard target-network copy interval, in gradient steps.
    pub target_sync_every: u64,
    pub learning_rate: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        DdqnConfig {
            gamma: 5e-3,
            batch_size: 1000,
            memory_capacity: 20_000,
            target_sync_every: 500,
            learning_rate: 1e-3,
            epsilon_decay: 0.99995,
            epsilon_floor: 0.05,
        }
    }
}

/// The agent: online and target networks, optimizer, replay memory, and
/// the exploration/replay random streams.
#[derive(Debug, Clone)]
pub struct DdqnTrainer {
    online: Network,
    target: Network,
    adam: Adam,
    memory: ReplayBuffer,
    config: DdqnConfig,
    seed: u64,
    env_steps: u64,
    train_steps: u64,
    exploration_rng: Rng,
    replay_rng: Rng,
}

impl DdqnTrainer {
    pub fn new(spec: &NetworkSpec, config: DdqnConfig, seed: u64) -> Result<Self> {
        if config.batch_size == 0 || config.batch_size > config.memory_capacity {
            return Err(Error::invalid("batch size must be in 1..=memory capacity"));
        }
        if config.target_sync_every == 0 {
            return Err(Error::invalid("target sync interval must be positive"));
        }
        let mut init_rng = Rng::stream(seed, streams::NET_INIT);
        let online = Network::build(spec, &mut init_rng)?;
        let mut target = Network::build(spec, &mut Rng::stream(seed, streams::TARGET_NET_INIT))?;
        target.sync_from(&online)?;
        let adam = Adam::new(config.learning_rate, online.param_count());
        let memory = ReplayBuffer::new(config.memory_capacity)?;
        Ok(DdqnTrainer {
            online,
            target,
            adam,
            memory,
            config,
            seed,
            env_steps: 0,
            train_steps: 0,
            exploration_rng: Rng::stream(seed, streams::EXPLORATION),
            replay_rng: Rng::stream(seed, streams::REPLAY),
        })
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    pub fn memory(&self) -> &ReplayBuffer {
        &self.memory
    }

    pub fn config(&self) -> &DdqnConfig {
        &self.config
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn rng_positions(&self) -> (u64, u64) {
        (self.exploration_rng.position(), self.replay_rng.position())
    }

    /// Current exploration rate.
    pub fn epsilon(&self) -> f64 {
        epsilon_at(self.env_steps, self.config.epsilon_decay, self.config.epsilon_floor)
    }

    /// Epsilon-greedy action for the state; advances the step count that
    /// drives the exploration schedule.
    pub fn act(
        &mut self,
        state: &CircuitTensor,
        energy: Option<f64>,
        legal: &[bool],
    ) -> Result<usize> {
        let eps = self.epsilon();
        self.env_steps += 1;
        select_action(&self.online, state, energy, legal, eps, &mut self.exploration_rng)
    }

    pub fn observe(&mut self, t: Transition) {
        self.memory.push(t);
    }

    /// One gradient step from a uniform replay batch; a no-op returning
    /// `None` until the memory holds a full batch.
    pub fn learn(&mut self, exec: &impl GradExecutor) -> Result<Option<f64>> {
        if self.memory.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = self.memory.sample(self.config.batch_size, &mut self.replay_rng)?;
        let mut samples = Vec::with_capacity(batch.len());
        for tr in &batch {
            let target = if tr.done {
                tr.reward
            } else {
                let q_on = self.online.q_values(&tr.next_state, tr.next_energy)?;
                let q_tg = self.target.q_values(&tr.next_state, tr.next_energy)?;
                let legal = vec![true; q_on.len()];
                td_target(tr.reward, false, self.config.gamma, &q_on, &q_tg, &legal)
            };
            samples.push(GradSample {
                input: tr.state.to_network_input(tr.state_energy),
                action: tr.action,
                target,
            });
        }
        let dropout_seed = mix64(self.seed ^ mix64(streams::DROPOUT ^ (self.train_steps << 8)));
        let (loss, grads) = exec.batch(&self.online, &samples, dropout_seed)?;
        self.adam.apply(self.online.params_mut(), &grads)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_sync_every) {
            self.target.sync_from(&self.online)?;
        }
        Ok(Some(loss))
    }

    /// Rebuilds a trainer from checkpointed pieces.
    #[allow(clippy::too_many_arguments)]
    pub fn restore(
        spec: &NetworkSpec,
        config: DdqnConfig,
        seed: u64,
        online_params: &[f64],
        target_params: &[f64],
        adam_step: u64,
        adam_m: Vec<f64>,
        adam_v: Vec<f64>,
        env_steps: u64,
        train_steps: u64,
        rng_positions: (u64, u64),
        transitions: Vec<Transition>,
        replay_cursor: usize,
    ) -> Result<Self> {
        let mut t = DdqnTrainer::new(spec, config, seed)?;
        if online_params.len() != t.online.param_count()
            || target_params.len() != t.online.param_count()
        {
            return Err(Error::DimensionMismatch {
                expected: t.online.param_count(),
                got: online_params.len(),
            });
        }
        t.online.params_mut().copy_from_slice(online_params);
        t.target.params_mut().copy_from_slice(target_params);
        t.adam.restore(adam_step, adam_m, adam_v)?;
        t.env_steps = env_steps;
        t.train_steps = train_steps;
        t.exploration_rng.jump_to(rng_positions.0);
        t.replay_rng.jump_to(rng_positions.1);
        for tr in transitions {
            t.memory.push(tr);
        }
        t.memory.set_cursor(replay_cursor)?;
        Ok(t)
    }
}

/// Everything a logger wants to know about one environment step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub episode: u64,
    pub step: usize,
    pub action: usize,
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub fidelity: f64,
    pub reward: f64,
    pub done: bool,
    pub cnot_count: usize,
    pub gate_count: usize,
    pub epsilon: f64,
    pub loss: Option<f64>,
}

impl StepRecord {
    fn from_outcome(episode: u64, epsilon: f64, loss: Option<f64>, out: &StepOutcome) -> Self {
        StepRecord {
            episode,
            step: out.step,
            action: out.action,
            energy: out.eval.energy,
            entropy: out.eval.entropy,
            free_energy: out.eval.free_energy.unwrap_or(f64::NAN),
            fidelity: out.eval.fidelity.unwrap_or(f64::NAN),
            reward: out.reward,
            done: out.done,
            cnot_count: out.cnot_count,
            gate_count: out.gate_count,
            epsilon,
            loss,
        }
    }
}

/// End-of-episode digest.
#[derive(Debug, Clone)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub steps: usize,
    pub total_reward: f64,
    /// Terminal reward hit the success bonus.
    pub success: bool,
    pub final_free_energy_error: f64,
    pub final_fidelity: f64,
    pub cnot_count: usize,
    pub gate_count: usize,
    pub candidate: Option<crate::env::PolishedCandidate>,
}

/// Plays one episode, learning after every step, reporting each step to
/// `on_step`.
pub fn run_episode(
    env: &mut SykEnv,
    trainer: &mut DdqnTrainer,
    exec: &impl GradExecutor,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<EpisodeSummary> {
    let (mut state, mut state_energy) = env.reset()?;
    let legal = env.legal_actions();
    let episode = env.episodes_started();
    let mut total_reward = 0.0;
    loop {
        let epsilon = trainer.epsilon();
        let action = trainer.act(&state, state_energy, &legal)?;
        let out = env.step(action)?;
        trainer.observe(Transition {
            state,
            state_energy,
            action,
            reward: out.reward,
            next_state: out.state.clone(),
            next_energy: out.state_energy,
            done: out.done,
        });
        let loss = trainer.learn(exec)?;
        total_reward += out.reward;
        on_step(&StepRecord::from_outcome(episode, epsilon, loss, &out));
        if out.done {
            return Ok(EpisodeSummary {
                episode,
                steps: out.step,
                total_reward,
                success: out.reward == 5.0,
                final_free_energy_error: out.free_energy_error,
                final_fidelity: out.eval.fidelity.unwrap_or(f64::NAN),
                cnot_count: out.cnot_count,
                gate_count: out.gate_count,
                candidate: out.polished,
            });
        }
        state = out.state;
        state_energy = out.state_energy;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::GateOp;
    use crate::codec::encode;
    use crate::vqtsp::ExpectationCircuit;

    fn tiny_tensor(gates: &[GateOp]) -> CircuitTensor {
        let mut c = ExpectationCircuit::empty(2);
        for &g in gates {
            c.push(g).unwrap();
        }
        encode(&c, 4).unwrap()
    }

    fn tiny_spec() -> NetworkSpec {
        // Input matches tiny_tensor: [1, 4, 5, 2] flattened by the FNN.
        NetworkSpec::fnn(vec![1, 4, 5, 2], vec![8], 8)
    }

    #[test]
    fn epsilon_schedule_matches_powf() {
        for &k in &[0u64, 1, 2, 7, 100, 5_000, 59_000, 1_000_000] {
            let fast = epsilon_at(k, 0.99995, 0.05);
            let expect = 0.99995f64.powf(k as f64).max(0.05);
            assert!(
                (fast - expect).abs() <= 1e-12 * expect.max(1e-300),
                "k = {k}: {fast} vs {expect}"
            );
        }
        assert_eq!(epsilon_at(0, 0.99995, 0.05), 1.0);
    }

    #[test]
    fn epsilon_schedule_monotone_and_floored() {
        let mut prev = f64::INFINITY;
        for k in (0..200_000u64).step_by(1000) {
            let e = epsilon_at(k, 0.99995, 0.05);
            assert!(e <= prev);
            assert!(e >= 0.05);
            prev = e;
        }
        assert_eq!(epsilon_at(10_000_000, 0.99995, 0.05), 0.05);
    }

    fn marker_transition(reward: f64) -> Transition {
        let t = tiny_tensor(&[]);
        Transition {
            state: t.clone(),
            state_energy: None,
            action: 0,
            reward,
            next_state: t,
            next_energy: None,
            done: false,
        }
    }

    #[test]
    fn replay_evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3).unwrap();
        for k in 0..5 {
            buf.push(marker_transition(k as f64));
        }
        assert_eq!(buf.len(), 3);
        let mut rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn replay_sample_is_without_replacement() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for k in 0..10 {
            buf.push(marker_transition(k as f64));
        }
        let mut rng = Rng::new(3);
        let got = buf.sample(10, &mut rng).unwrap();
        let mut rewards: Vec<f64> = got.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert_eq!(rewards, expect);
        assert!(buf.sample(11, &mut rng).is_err());
    }

    #[test]
    fn greedy_respects_legality() {
        let q = [1.0, 9.0, 3.0];
        assert_eq!(greedy_action(&q, &[true, true, true]), Some(1));
        assert_eq!(greedy_action(&q, &[true, false, true]), Some(2));
        assert_eq!(greedy_action(&q, &[false, false, false]), None);
    }

    #[test]
    fn greedy_breaks_ties_toward_lower_index() {
        let q = [2.0, 2.0, 1.0];
        assert_eq!(greedy_action(&q, &[true, true, true]), Some(0));
    }

    #[test]
    fn td_target_double_estimator() {
        // Online argmax is index 1; the target net's price at 1 is used,
        // not the target net's own maximum (index 2).
        let q_online = [1.0, 5.0, 3.0];
        let q_target = [10.0, 20.0, 30.0];
        let legal = [true, true, true];
        let y = td_target(0.5, false, 0.1, &q_online, &q_target, &legal);
        assert!((y - (0.5 + 0.1 * 20.0)).abs() < 1e-12);
        let y = td_target(0.5, true, 0.1, &q_online, &q_target, &legal);
        assert_eq!(y, 0.5);
        // Masking the online argmax moves the choice.
        let y = td_target(0.0, false, 1.0, &q_online, &q_target, &[true, false, true]);
        assert_eq!(y, 30.0);
    }

    #[test]
    fn select_action_greedy_when_epsilon_zero() {
        struct Fixed(Vec<f64>);
        impl QFunction for Fixed {
            fn q_values(&self, _: &CircuitTensor, _: Option<f64>) -> Result<Vec<f64>> {
                Ok(self.0.clone())
            }
        }
        let q = Fixed(vec![0.0; 8]);
        let state = tiny_tensor(&[]);
        let mut legal = vec![false; 8];
        legal[6] = true;
        let mut rng = Rng::new(0);
        for _ in 0..5 {
            let a = select_action(&q, &state, None, &legal, 0.0, &mut rng).unwrap();
            assert_eq!(a, 6);
        }
        // Fully random draws stay legal and eventually vary.
        let legal = vec![true; 8];
        let mut seen = [false; 8];
        for _ in 0..64 {
            let a = select_action(&q, &state, None, &legal, 1.0, &mut rng).unwrap();
            seen[a] = true;
        }
        assert!(seen.iter().filter(|&&b| b).count() > 3);
    }

    #[test]
    fn sample_gradient_matches_finite_differences() {
        let mut rng = Rng::new(11);
        let spec = tiny_spec();
        let mut net = Network::build(&spec, &mut rng).unwrap();
        let sample = GradSample {
            input: tiny_tensor(&[GateOp::rx(0, 0.0), GateOp::cnot(0, 1)])
                .to_network_input(None),
            action: 3,
            target: 0.7,
        };
        let mut grads = vec![0.0; net.param_count()];
        let mut drng = Rng::new(0);
        accumulate_sample(&net, &sample, 1.0, &mut grads, &mut drng).unwrap();

        let count = net.param_count();
        let eps = 1e-6;
        for k in (0..count).step_by(37) {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + eps;
            let qp = net.forward(&sample.input).unwrap().data()[3];
            net.params_mut()[k] = orig - eps;
            let qm = net.forward(&sample.input).unwrap().data()[3];
            net.params_mut()[k] = orig;
            let lp = huber(qp - 0.7, HUBER_DELTA);
            let lm = huber(qm - 0.7, HUBER_DELTA);
            let numeric = (lp - lm) / (2.0 * eps);
            assert!(
                (grads[k] - numeric).abs() < 1e-6 * (1.0 + numeric.abs()),
                "param {k}: {} vs {numeric}",
                grads[k]
            );
        }
    }

    #[test]
    fn executor_averages_over_batch() {
        let mut rng = Rng::new(5);
        let net = Network::build(&tiny_spec(), &mut rng).unwrap();
        let one = GradSample {
            input: tiny_tensor(&[GateOp::ry(1, 0.0)]).to_network_input(None),
            action: 2,
            target: -0.3,
        };
        let exec = SerialExecutor;
        let (l1, g1) = exec.batch(&net, core::slice::from_ref(&one), 9).unwrap();
        let both = vec![one.clone(), one.clone()];
        let (l2, g2) = exec.batch(&net, &both, 9).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn fill_trainer(trainer: &mut DdqnTrainer, n: usize) {
        let s0 = tiny_tensor(&[]);
        let s1 = tiny_tensor(&[GateOp::rx(0, 0.0)]);
        for k in 0..n {
            trainer.observe(Transition {
                state: s0.clone(),
                state_energy: None,
                action: k % 8,
                reward: if k % 3 == 0 { 1.0 } else { -0.2 },
                next_state: s1.clone(),
                next_energy: None,
                done: k % 4 == 0,
            });
        }
    }

    fn small_config() -> DdqnConfig {
        DdqnConfig { batch_size: 8, memory_capacity: 64, target_sync_every: 2, ..Default::default() }
    }

    #[test]
    fn learn_waits_for_full_batch() {
        let mut trainer = DdqnTrainer::new(&tiny_spec(), small_config(), 7).unwrap();
        fill_trainer(&mut trainer, 7);
        assert!(trainer.learn(&SerialExecutor).unwrap().is_none());
        fill_trainer(&mut trainer, 1);
        assert!(trainer.learn(&SerialExecutor).unwrap().is_some());
        assert_eq!(trainer.train_steps(), 1);
    }

    #[test]
    fn target_syncs_on_schedule() {
        let mut trainer = DdqnTrainer::new(&tiny_spec(), small_config(), 7).unwrap();
        fill_trainer(&mut trainer, 16);
        trainer.learn(&SerialExecutor).unwrap();
        assert_ne!(trainer.online().params(), trainer.target().params());
        trainer.learn(&SerialExecutor).unwrap();
        assert_eq!(trainer.online().params(), trainer.target().params());
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut trainer = DdqnTrainer::new(&tiny_spec(), small_config(), 42).unwrap();
            fill_trainer(&mut trainer, 20);
            for _ in 0..3 {
                trainer.learn(&SerialExecutor).unwrap();
            }
            trainer.online().params().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn restore_reproduces_trainer() {
        let spec = tiny_spec();
        let mut a = DdqnTrainer::new(&spec, small_config(), 13).unwrap();
        fill_trainer(&mut a, 20);
        let state0 = tiny_tensor(&[]);
        let legal = vec![true; 8];
        for _ in 0..4 {
            a.act(&state0, None, &legal).unwrap();
            a.learn(&SerialExecutor).unwrap();
        }
        let (m, v) = a.adam().state();
        let mut b = DdqnTrainer::restore(
            &spec,
            small_config(),
            13,
            a.online().params(),
            a.target().params(),
            a.adam().step_count(),
            m.to_vec(),
            v.to_vec(),
            a.env_steps(),
            a.train_steps(),
            a.rng_positions(),
            a.memory().iter().cloned().collect(),
            a.memory().cursor(),
        )
        .unwrap();
        // Both proceed identically afterwards.
        let xa = a.act(&state0, None, &legal).unwrap();
        let xb = b.act(&state0, None, &legal).unwrap();
        assert_eq!(xa, xb);
        let la = a.learn(&SerialExecutor).unwrap();
        let lb = b.learn(&SerialExecutor).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.online().params(), b.online().params());
    }

    #[test]
    fn cursor_restore_keeps_eviction_order_after_wraparound() {
        let mut full = ReplayBuffer::new(4).unwrap();
        for k in 0..6 {
            full.push(marker_transition(k as f64));
        }
        assert_eq!(full.cursor(), 2);
        let mut rebuilt = ReplayBuffer::new(4).unwrap();
        for t in full.iter() {
            rebuilt.push(t.clone());
        }
        rebuilt.set_cursor(full.cursor()).unwrap();
        full.push(marker_transition(9.0));
        rebuilt.push(marker_transition(9.0));
        let raw: Vec<f64> = (0..4).map(|i| full.get(i).reward).collect();
        let raw_rebuilt: Vec<f64> = (0..4).map(|i| rebuilt.get(i).reward).collect();
        assert_eq!(raw, raw_rebuilt);
        assert!(rebuilt.set_cursor(7).is_err());
    }

    #[test]
    fn rejects_oversized_batch_config() {
        let cfg = DdqnConfig { batch_size: 100, memory_capacity: 10, ..Default::default() };
        assert!(DdqnTrainer::new(&tiny_spec(), cfg, 0).is_err());
    }
}
