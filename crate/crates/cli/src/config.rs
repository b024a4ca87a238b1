//! Declarative run configuration: one TOML document drives instance
//! generation, environment, agent, noise, and filtering settings.
//!
//! Unknown keys are rejected so a typo cannot silently fall back to a
//! default, and the fully resolved document (every default made explicit)
//! is written into the run directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sykrl_core::agent::DdqnConfig;
use sykrl_core::backend::CouplingMap;
use sykrl_core::env::{EnvConfig, RewardMode};
use sykrl_core::nn::NetworkSpec;
use sykrl_core::syk::SykInstance;
use sykrl_core::vqtsp::{Entangler, NoiseModel};

use crate::formats;

/// Top-level run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Inverse temperatures; training runs one sub-run per entry.
    pub betas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Wall-clock budget per invocation; unset means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_hours: Option<f64>,
    pub instance: InstanceSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub noise: NoiseSection,
    pub filter: FilterSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            betas: vec![5.2, 18.0, 35.0],
            output_dir: None,
            wall_clock_hours: None,
            instance: InstanceSection::default(),
            env: EnvSection::default(),
            agent: AgentSection::default(),
            noise: NoiseSection::default(),
            filter: FilterSection::default(),
        }
    }
}

/// Which disorder realization to train on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    /// Majorana count N; the register holds N/2 qubits.
    pub majoranas: usize,
    pub seed: u64,
    /// Load this instance file instead of generating from (majoranas, seed).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for InstanceSection {
    fn default() -> Self {
        InstanceSection { majoranas: 8, seed: 0, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    /// `"all-to-all"`, `"eagle-r3-t4"`, or a path to a coupling-map JSON.
    pub coupling_map: String,
    /// Depth cap; unset picks 30 for n <= 5 and 40 above.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_max: Option<usize>,
    /// `"free_energy"` or `"free_energy_fidelity"`.
    pub reward_mode: String,
    pub zeta_f: f64,
    pub zeta_fid: f64,
    pub energy_weight: f64,
    pub fidelity_weight: f64,
    /// Optimizer evaluations per environment step.
    pub step_budget: usize,
    /// Optimizer evaluations for the terminal polish.
    pub final_budget: usize,
    /// Adds the free-energy-error plane as a second network input channel.
    pub energy_plane: bool,
    pub optimizer_step: f64,
    /// `"cyclic-ring"` or `"all-to-all"` entangling layer of the
    /// entropy-source circuit.
    pub entangler: String,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            coupling_map: String::from("all-to-all"),
            d_max: None,
            reward_mode: String::from("free_energy_fidelity"),
            zeta_f: 1e-2,
            zeta_fid: 0.9,
            energy_weight: 0.6,
            fidelity_weight: 0.4,
            step_budget: 200,
            final_budget: 1000,
            energy_plane: false,
            optimizer_step: 0.4,
            entangler: String::from("cyclic-ring"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    /// Training runs one sub-run per seed.
    pub seeds: Vec<u64>,
    /// Channel widths of the 3D-CNN value network.
    pub channels: Vec<usize>,
    /// Optional hidden linear layer between flatten and the output head.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_hidden: Option<usize>,
    pub batch_size: usize,
    pub memory_size: usize,
    /// Hard target-network copy interval, in gradient steps.
    pub target_update_every: u64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub dropout: f64,
    pub max_episodes: u64,
    /// Episodes between periodic checkpoints.
    pub checkpoint_every: u64,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            seeds: vec![0],
            channels: vec![32, 64, 128, 256],
            head_hidden: None,
            batch_size: 1000,
            memory_size: 20_000,
            target_update_every: 500,
            gamma: 5e-3,
            learning_rate: 1e-3,
            epsilon_decay: 0.99995,
            epsilon_min: 0.05,
            dropout: 0.0,
            max_episodes: 5000,
            checkpoint_every: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub enabled: bool,
    /// Bit-flip probability after every one-qubit gate.
    pub p_bitflip: f64,
    /// Two-qubit depolarizing probability after every CNOT.
    pub p_depolarizing: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let hw = NoiseModel::hardware_default();
        NoiseSection {
            enabled: false,
            p_bitflip: hw.p_bitflip,
            p_depolarizing: hw.p_depolarizing,
        }
    }
}

/// Weights of the candidate score; unset entries fall back to the
/// mode-and-size table in the analysis module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entropy_weight: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).context("invalid run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// The configuration as canonical TOML, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing run configuration")
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            bail!("betas must not be empty");
        }
        for &b in &self.betas {
            if !b.is_finite() || b <= 0.0 {
                bail!("betas must be finite and positive, got {b}");
            }
        }
        if let Some(h) = self.wall_clock_hours {
            if !h.is_finite() || h <= 0.0 {
                bail!("wall_clock_hours must be finite and positive");
            }
        }
        if self.instance.path.is_none()
            && (self.instance.majoranas < 4 || !self.instance.majoranas.is_multiple_of(2))
        {
            bail!("instance.majoranas must be an even number of at least 4");
        }
        self.reward_mode()?;
        self.entangler()?;
        if self.env.zeta_f <= 0.0 || self.env.zeta_fid <= 0.0 {
            bail!("success thresholds must be positive");
        }
        if self.env.energy_weight + self.env.fidelity_weight <= 0.0 {
            bail!("reward shaping weights must sum to a positive value");
        }
        if self.env.step_budget == 0 || self.env.final_budget == 0 {
            bail!("optimizer budgets must be positive");
        }
        if self.agent.seeds.is_empty() {
            bail!("agent.seeds must not be empty");
        }
        if self.agent.channels.is_empty() {
            bail!("agent.channels must not be empty");
        }
        if self.agent.batch_size == 0 || self.agent.batch_size > self.agent.memory_size {
            bail!("agent.batch_size must lie in 1..=agent.memory_size");
        }
        if self.agent.target_update_every == 0 {
            bail!("agent.target_update_every must be positive");
        }
        if !(0.0..1.0).contains(&self.agent.dropout) {
            bail!("agent.dropout must lie in [0, 1)");
        }
        if !(self.agent.epsilon_decay > 0.0 && self.agent.epsilon_decay <= 1.0) {
            bail!("agent.epsilon_decay must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.agent.epsilon_min) {
            bail!("agent.epsilon_min must lie in [0, 1]");
        }
        if self.agent.max_episodes == 0 {
            bail!("agent.max_episodes must be positive");
        }
        if self.agent.checkpoint_every == 0 {
            bail!("agent.checkpoint_every must be positive");
        }
        if self.noise.enabled
            && !((0.0..=1.0).contains(&self.noise.p_bitflip)
                && (0.0..=1.0).contains(&self.noise.p_depolarizing))
        {
            bail!("noise probabilities must lie in [0, 1]");
        }
        Ok(())
    }

    /// Loads or generates the configured disorder realization.
    pub fn instance(&self) -> Result<SykInstance> {
        match &self.instance.path {
            Some(p) => formats::load_instance(p),
            None => Ok(SykInstance::generate(self.instance.majoranas, self.instance.seed)?),
        }
    }

    pub fn reward_mode(&self) -> Result<RewardMode> {
        match self.env.reward_mode.as_str() {
            "free_energy" => Ok(RewardMode::FreeEnergy),
            "free_energy_fidelity" => Ok(RewardMode::FreeEnergyFidelity),
            other => bail!(
                "env.reward_mode must be \"free_energy\" or \"free_energy_fidelity\", \
                 got {other:?}"
            ),
        }
    }

    pub fn entangler(&self) -> Result<Entangler> {
        match self.env.entangler.as_str() {
            "cyclic-ring" => Ok(Entangler::CyclicRing),
            "all-to-all" => Ok(Entangler::AllToAll),
            other => bail!("env.entangler must be \"cyclic-ring\" or \"all-to-all\", got {other:?}"),
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            enabled: self.noise.enabled,
            p_bitflip: self.noise.p_bitflip,
            p_depolarizing: self.noise.p_depolarizing,
        }
    }

    /// Resolves the coupling-map name or file for an `n`-qubit register.
    pub fn coupling_map(&self, num_qubits: usize) -> Result<CouplingMap> {
        let map = match self.env.coupling_map.as_str() {
            "all-to-all" => CouplingMap::all_to_all(num_qubits),
            "eagle-r3-t4" => CouplingMap::eagle_r3_t4(),
            path => formats::load_coupling_map(Path::new(path))?,
        };
        if map.num_qubits() != num_qubits {
            bail!(
                "coupling map {:?} covers {} qubits but the instance needs {num_qubits}",
                map.name(),
                map.num_qubits()
            );
        }
        Ok(map)
    }

    pub fn effective_d_max(&self, num_qubits: usize) -> usize {
        self.env.d_max.unwrap_or(if num_qubits <= 5 { 30 } else { 40 })
    }

    pub fn env_config(&self, beta: f64, num_qubits: usize) -> Result<EnvConfig> {
        let map = self.coupling_map(num_qubits)?;
        let mut cfg = EnvConfig::new(beta, map);
        cfg.d_max = self.effective_d_max(num_qubits);
        cfg.reward_mode = self.reward_mode()?;
        cfg.zeta_f = self.env.zeta_f;
        cfg.zeta_fidelity = self.env.zeta_fid;
        cfg.energy_weight = self.env.energy_weight;
        cfg.fidelity_weight = self.env.fidelity_weight;
        cfg.step_budget = self.env.step_budget;
        cfg.final_budget = self.env.final_budget;
        cfg.noise = self.noise_model();
        cfg.entangler = self.entangler()?;
        cfg.energy_plane = self.env.energy_plane;
        cfg.optimizer_step = self.env.optimizer_step;
        Ok(cfg)
    }

    pub fn ddqn_config(&self) -> DdqnConfig {
        DdqnConfig {
            gamma: self.agent.gamma,
            batch_size: self.agent.batch_size,
            memory_capacity: self.agent.memory_size,
            target_sync_every: self.agent.target_update_every,
            learning_rate: self.agent.learning_rate,
            epsilon_decay: self.agent.epsilon_decay,
            epsilon_floor: self.agent.epsilon_min,
        }
    }

    /// Value-network layout for a given register and action count.
    pub fn network_spec(&self, num_qubits: usize, actions: usize) -> NetworkSpec {
        let channels_in = 1 + usize::from(self.env.energy_plane);
        let d_max = self.effective_d_max(num_qubits);
        let input = vec![channels_in, d_max, num_qubits + 3, num_qubits];
        let mut spec = NetworkSpec::cnn(input, self.agent.channels.clone(), actions);
        spec.dropout = self.agent.dropout;
        spec.head_hidden = self.agent.head_hidden;
        spec
    }

    /// Candidate-score weights, falling back to the built-in table.
    pub fn filter_weights(&self, majorana_count: usize) -> Result<(f64, f64)> {
        let (wa, wb) = sykrl_core::analysis::default_filter_weights(
            self.reward_mode()?,
            majorana_count,
        );
        Ok((
            self.filter.energy_weight.unwrap_or(wa),
            self.filter.entropy_weight.unwrap_or(wb),
        ))
    }

    /// A copy with every derivable default made explicit, suitable for the
    /// run manifest.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut out = self.clone();
        let inst = self.instance()?;
        out.instance.majoranas = inst.majorana_count();
        out.instance.seed = inst.seed();
        let n = inst.num_qubits();
        out.env.d_max = Some(self.effective_d_max(n));
        let (wa, wb) = self.filter_weights(inst.majorana_count())?;
        out.filter.energy_weight = Some(wa);
        out.filter.entropy_weight = Some(wb);
        Ok(out)
    }
}
