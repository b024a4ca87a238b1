//! Gate-placement environment for growing expectation circuits.
//!
//! An episode starts from an empty expectation circuit. Each step appends
//! one gate chosen from a fixed action catalogue (three rotation axes per
//! qubit, then every directed CNOT allowed by the coupling map), re-optimizes
//! all angles warm-started from the previous step, and scores the move by
//! how much closer the free energy moved toward the exact value. Episodes
//! end on success, or when the circuit reaches its depth cap `d_max`.
//!
//! State observed by the agent: the circuit's binary placement tensor from
//! [`crate::codec`], optionally extended with a constant plane holding the
//! normalized current free-energy error.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::backend::{CouplingMap, GateOp};
use crate::codec::{encode, CircuitTensor};
use crate::error::{Error, Result};
use crate::optim::OptimizerConfig;
use crate::pauli::PauliSum;
use crate::rng::{mix64, streams, Rng};
use crate::thermal::ThermalReference;
use crate::vqtsp::{Entangler, EntropyCircuit, Evaluation, ExpectationCircuit, NoiseModel, Protocol};

/// Which terminal condition and shaping signal an episode uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// Success when the free energy is within `zeta_f` of the exact value.
    FreeEnergy,
    /// Success additionally requires the fidelity threshold `zeta_fidelity`;
    /// shaping mixes the free-energy term with a fidelity term.
    FreeEnergyFidelity,
}

/// Environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub beta: f64,
    /// Maximum gates per episode and depth of the placement tensor.
    pub d_max: usize,
    pub reward_mode: RewardMode,
    /// Free-energy success threshold.
    pub zeta_f: f64,
    /// Fidelity success threshold (second reward mode only).
    pub zeta_fidelity: f64,
    /// Weight of the free-energy term in the composite shaping reward.
    pub energy_weight: f64,
    /// Weight of the fidelity term in the composite shaping reward.
    pub fidelity_weight: f64,
    /// Optimizer evaluations per environment step (and per reset).
    pub step_budget: usize,
    /// Optimizer evaluations for the terminal polish.
    pub final_budget: usize,
    pub noise: NoiseModel,
    pub entangler: Entangler,
    pub coupling_map: CouplingMap,
    /// Adds the constant free-energy-error plane to the observation.
    pub energy_plane: bool,
    /// Initial simplex edge for the angle optimizer.
    pub optimizer_step: f64,
}

impl EnvConfig {
    /// Defaults for a given connectivity; beta must still be chosen.
    pub fn new(beta: f64, coupling_map: CouplingMap) -> Self {
        let n = coupling_map.num_qubits();
        EnvConfig {
            beta,
            d_max: if n <= 5 { 30 } else { 40 },
            reward_mode: RewardMode::FreeEnergyFidelity,
            zeta_f: 1e-2,
            zeta_fidelity: 0.9,
            energy_weight: 0.6,
            fidelity_weight: 0.4,
            step_budget: 200,
            final_budget: 1000,
            noise: NoiseModel::noiseless(),
            entangler: Entangler::CyclicRing,
            coupling_map,
            energy_plane: false,
            optimizer_step: 0.4,
        }
    }
}

/// Fixed catalogue of placeable gates: rotations first (axis-major), then
/// the coupling map's directed CNOT pairs in listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    num_qubits: usize,
    pairs: Vec<(usize, usize)>,
}

impl ActionSpace {
    pub fn new(map: &CouplingMap) -> Self {
        ActionSpace { num_qubits: map.num_qubits(), pairs: map.pairs().to_vec() }
    }

    pub fn len(&self) -> usize {
        3 * self.num_qubits + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// The gate template for an action id; rotations carry angle zero.
    pub fn gate(&self, action: usize) -> Result<GateOp> {
        let n = self.num_qubits;
        if action < 3 * n {
            let axis = crate::backend::Axis::from_index(action / n).expect("range checked");
            Ok(GateOp::Rotation { axis, qubit: action % n, angle: 0.0 })
        } else if action < self.len() {
            let (control, target) = self.pairs[action - 3 * n];
            Ok(GateOp::Cnot { control, target })
        } else {
            Err(Error::invalid(alloc::format!(
                "action {action} out of range ({} actions)",
                self.len()
            )))
        }
    }

    pub fn describe(&self, action: usize) -> String {
        match self.gate(action) {
            Ok(GateOp::Rotation { axis, qubit, .. }) => {
                alloc::format!("{} q{qubit}", axis.name())
            }
            Ok(GateOp::Cnot { control, target }) => {
                alloc::format!("CNOT {control}->{target}")
            }
            Err(_) => String::from("invalid"),
        }
    }
}

/// Shaping term: normalized one-step free-energy improvement, clamped to
/// `[-1, 1]`. A vanishing denominator (already at the target) yields zero.
pub fn energy_term(f_prev: f64, f_curr: f64, f_true: f64) -> f64 {
    let denom = (f_prev - f_true).abs();
    if denom == 0.0 {
        return 0.0;
    }
    ((f_prev - f_curr) / denom).clamp(-1.0, 1.0)
}

/// Reward and termination for the free-energy-only mode.
pub fn reward_free_energy(
    f_curr: f64,
    f_prev: f64,
    f_true: f64,
    step: usize,
    d_max: usize,
    zeta_f: f64,
) -> (f64, bool) {
    let err = (f_curr - f_true).abs();
    if err <= zeta_f {
        (5.0, true)
    } else if step >= d_max {
        (-5.0, true)
    } else {
        (energy_term(f_prev, f_curr, f_true), false)
    }
}

/// Reward and termination for the combined free-energy/fidelity mode.
pub fn reward_free_energy_fidelity(
    f_curr: f64,
    fidelity: f64,
    f_prev: f64,
    f_true: f64,
    step: usize,
    d_max: usize,
    zeta_f: f64,
    zeta_fidelity: f64,
    energy_weight: f64,
    fidelity_weight: f64,
) -> (f64, bool) {
    let err = (f_curr - f_true).abs();
    if err <= zeta_f && fidelity >= zeta_fidelity {
        return (5.0, true);
    }
    if step >= d_max && fidelity < zeta_fidelity {
        return (-5.0, true);
    }
    let shaped = energy_weight * energy_term(f_prev, f_curr, f_true)
        + fidelity_weight * (2.0 * fidelity - 1.0);
    // At the depth cap with adequate fidelity but excessive free-energy
    // error the episode still ends, carrying the shaped reward.
    (shaped, step >= d_max)
}

/// Everything the driver needs to log and learn from one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: CircuitTensor,
    /// Normalized free-energy error for the observation's energy plane,
    /// populated when the feature is enabled.
    pub state_energy: Option<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub step: usize,
    pub eval: Evaluation,
    pub free_energy_error: f64,
    pub cnot_count: usize,
    pub gate_count: usize,
    /// Terminal-only: evaluation after the full-budget polish.
    pub polished: Option<PolishedCandidate>,
}

/// Final candidate data captured when an episode ends.
#[derive(Debug, Clone)]
pub struct PolishedCandidate {
    pub eval: Evaluation,
    pub free_energy_error: f64,
    pub theta: Vec<f64>,
    pub circuit: ExpectationCircuit,
}

/// The circuit-growing environment for one Hamiltonian at one temperature.
#[derive(Debug, Clone)]
pub struct SykEnv {
    protocol: Protocol,
    reference: ThermalReference,
    actions: ActionSpace,
    config: EnvConfig,
    seed: u64,
    theta_rng: Rng,
    episode: u64,
    f_true: f64,
    // Per-episode state.
    circuit: ExpectationCircuit,
    theta: Vec<f64>,
    f_prev: f64,
    f_zero: f64,
    step_no: usize,
    in_episode: bool,
}

impl SykEnv {
    pub fn new(h: PauliSum, config: EnvConfig, seed: u64) -> Result<Self> {
        let n = h.num_qubits();
        if config.coupling_map.num_qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: config.coupling_map.num_qubits(),
            });
        }
        if config.d_max == 0 {
            return Err(Error::invalid("d_max must be positive"));
        }
        if config.step_budget == 0 || config.final_budget == 0 {
            return Err(Error::invalid("optimizer budgets must be positive"));
        }
        let reference = ThermalReference::new(&h, config.beta)?;
        let f_true = reference
            .free_energy()
            .ok_or_else(|| Error::invalid("environment requires beta > 0"))?;
        let entropy_circuit = EntropyCircuit::new(n, config.entangler)?;
        let protocol = Protocol::new(entropy_circuit, h, config.beta, config.noise)?;
        let actions = ActionSpace::new(&config.coupling_map);
        Ok(SykEnv {
            protocol,
            reference,
            actions,
            config,
            seed,
            theta_rng: Rng::stream(seed, streams::THETA_INIT),
            episode: 0,
            f_true,
            circuit: ExpectationCircuit::empty(n),
            theta: vec![0.0; 3 * n],
            f_prev: 0.0,
            f_zero: 0.0,
            step_no: 0,
            in_episode: false,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.protocol.num_qubits()
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn reference(&self) -> &ThermalReference {
        &self.reference
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    /// Exact free energy being targeted.
    pub fn f_true(&self) -> f64 {
        self.f_true
    }

    /// Free energy after the reset-time optimization of theta alone.
    pub fn f_zero(&self) -> f64 {
        self.f_zero
    }

    /// Episodes started so far.
    pub fn episodes_started(&self) -> u64 {
        self.episode
    }

    /// Position of the per-episode angle stream, for checkpointing.
    pub fn theta_rng_position(&self) -> u64 {
        self.theta_rng.position()
    }

    /// Restores the episode counter and angle stream from a checkpoint.
    /// The next `reset` then continues exactly where the saved run left off.
    pub fn restore_position(&mut self, episodes_started: u64, theta_rng_position: u64) {
        self.episode = episodes_started;
        self.theta_rng.jump_to(theta_rng_position);
        self.in_episode = false;
    }

    pub fn current_step(&self) -> usize {
        self.step_no
    }

    pub fn current_circuit(&self) -> &ExpectationCircuit {
        &self.circuit
    }

    pub fn current_theta(&self) -> &[f64] {
        &self.theta
    }

    /// All actions are always legal; the catalogue never contains a gate
    /// the hardware cannot place.
    pub fn legal_actions(&self) -> Vec<bool> {
        vec![true; self.actions.len()]
    }

    /// Observation pair for the current circuit state.
    pub fn observation(&self) -> Result<(CircuitTensor, Option<f64>)> {
        let tensor = encode(&self.circuit, self.config.d_max)?;
        Ok((tensor, self.energy_feature()))
    }

    fn energy_feature(&self) -> Option<f64> {
        if self.config.energy_plane {
            Some(((self.f_prev - self.f_true) / (self.f_true.abs() + 1.0)).clamp(-1.0, 1.0))
        } else {
            None
        }
    }

    fn optimizer_config(&self, budget: usize, salt: u64) -> OptimizerConfig {
        OptimizerConfig {
            max_evaluations: budget,
            initial_step: self.config.optimizer_step,
            f_tolerance: 1e-10,
            seed: mix64(self.seed ^ mix64(salt)),
        }
    }

    /// Starts a new episode: fresh random theta, empty circuit, and a
    /// theta-only optimization to establish the starting free energy.
    pub fn reset(&mut self) -> Result<(CircuitTensor, Option<f64>)> {
        self.episode += 1;
        self.step_no = 0;
        self.circuit = ExpectationCircuit::empty(self.num_qubits());
        let theta0 = self.protocol.entropy_circuit().random_angles(&mut self.theta_rng);
        let minimized = self.protocol.minimize_free_energy(
            &theta0,
            &self.circuit,
            &self.optimizer_config(self.config.step_budget, self.episode << 20),
        )?;
        self.theta = minimized.theta;
        self.f_prev = minimized.free_energy;
        self.f_zero = minimized.free_energy;
        self.in_episode = true;
        let tensor = encode(&self.circuit, self.config.d_max)?;
        Ok((tensor, self.energy_feature()))
    }

    /// Appends the action's gate, re-optimizes, and scores the step.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if !self.in_episode {
            return Err(Error::invalid("step called before reset or after episode end"));
        }
        let gate = self.actions.gate(action)?;
        self.circuit.push(gate)?;
        self.step_no += 1;

        let minimized = self.protocol.minimize_free_energy(
            &self.theta,
            &self.circuit,
            &self.optimizer_config(
                self.config.step_budget,
                (self.episode << 20) | self.step_no as u64,
            ),
        )?;
        self.theta = minimized.theta;
        self.circuit = minimized.circuit;
        let f_curr = minimized.free_energy;
        let eval = self.protocol.evaluate(&self.theta, &self.circuit, Some(&self.reference))?;
        let fidelity = eval.fidelity.expect("reference supplied");

        let (reward, done) = match self.config.reward_mode {
            RewardMode::FreeEnergy => reward_free_energy(
                f_curr,
                self.f_prev,
                self.f_true,
                self.step_no,
                self.config.d_max,
                self.config.zeta_f,
            ),
            RewardMode::FreeEnergyFidelity => reward_free_energy_fidelity(
                f_curr,
                fidelity,
                self.f_prev,
                self.f_true,
                self.step_no,
                self.config.d_max,
                self.config.zeta_f,
                self.config.zeta_fidelity,
                self.config.energy_weight,
                self.config.fidelity_weight,
            ),
        };
        self.f_prev = f_curr;

        let polished = if done {
            self.in_episode = false;
            let polish = self.protocol.minimize_free_energy(
                &self.theta,
                &self.circuit,
                &self.optimizer_config(
                    self.config.final_budget,
                    (self.episode << 20) | (1 << 19) | self.step_no as u64,
                ),
            )?;
            let eval =
                self.protocol.evaluate(&polish.theta, &polish.circuit, Some(&self.reference))?;
            let err = (eval.free_energy.expect("beta > 0") - self.f_true).abs();
            Some(PolishedCandidate {
                eval,
                free_energy_error: err,
                theta: polish.theta,
                circuit: polish.circuit,
            })
        } else {
            None
        };

        let state = encode(&self.circuit, self.config.d_max)?;
        Ok(StepOutcome {
            state,
            state_energy: self.energy_feature(),
            action,
            reward,
            done,
            step: self.step_no,
            eval,
            free_energy_error: (f_curr - self.f_true).abs(),
            cnot_count: self.circuit.cnot_count(),
            gate_count: self.circuit.gate_count(),
            polished,
        })
    }
}
