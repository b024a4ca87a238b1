//! End-to-end command drivers: training runs with metrics, checkpoints,
//! and a candidate store, plus filtering, CNOT benchmarking, and
//! standalone circuit evaluation.
//!
//! A run directory is laid out as
//!
//! ```text
//! root/
//!   config.toml          resolved configuration, defaults included
//!   instance.json        the disorder realization trained on
//!   manifest.json        seeds and sub-run names
//!   s<seed>_b<beta>/     one sub-run per (agent seed, beta)
//!     steps.jsonl        one record per environment step
//!     episodes.jsonl     one record per episode
//!     candidates.jsonl   every episode-terminal circuit evaluation
//!     circuits/          the candidate circuits as text files
//!     checkpoint/        resumable training state
//!     summary.json       invocation outcome
//! ```

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use sykrl_core::agent::{run_episode, DdqnTrainer, EpisodeSummary, SerialExecutor};
use sykrl_core::analysis::{
    cnot_improvement, cubic_band, exponential_band, fit_cubic, fit_exponential, filter_best,
    trotter_cnot_count, BandPoint, CandidateRecord, CurveFit,
};
use sykrl_core::env::SykEnv;
use sykrl_core::optim::OptimizerConfig;
use sykrl_core::syk::SykInstance;
use sykrl_core::thermal::{ThermalReference, MAX_DENSE_QUBITS};
use sykrl_core::vqtsp::{EntropyCircuit, ExpectationCircuit, NoiseModel, Protocol};

use crate::config::RunConfig;
use crate::formats::{self, json_num, json_string, CandidateLine, CheckpointState};

pub const RUN_CONFIG_FILE: &str = "config.toml";
pub const RUN_MANIFEST_FILE: &str = "manifest.json";
pub const INSTANCE_FILE: &str = "instance.json";
const METRIC_FILES: [&str; 3] = ["steps.jsonl", "episodes.jsonl", "candidates.jsonl"];

/// One (agent seed, beta) pair of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SubRunSpec {
    pub seed: u64,
    pub beta: f64,
}

impl SubRunSpec {
    pub fn dir_name(&self) -> String {
        format!("s{}_b{}", self.seed, self.beta)
    }
}

/// Cross product of configured agent seeds and betas, seeds outermost.
pub fn sub_run_specs(cfg: &RunConfig) -> Vec<SubRunSpec> {
    let mut specs = Vec::new();
    for &seed in &cfg.agent.seeds {
        for &beta in &cfg.betas {
            specs.push(SubRunSpec { seed, beta });
        }
    }
    specs
}

/// Progress callbacks during training.
pub enum TrainEvent<'a> {
    SubRunStarted { spec: &'a SubRunSpec, dir: &'a Path, resumed_at: u64 },
    EpisodeFinished { spec: &'a SubRunSpec, summary: &'a EpisodeSummary, epsilon: f64 },
    SubRunFinished { report: &'a SubRunReport },
}

/// Outcome of one sub-run within one invocation.
#[derive(Debug, Clone)]
pub struct SubRunReport {
    pub seed: u64,
    pub beta: f64,
    pub dir: PathBuf,
    /// Episodes finished over the sub-run's lifetime, resumes included.
    pub episodes_done: u64,
    /// Success episodes observed in this invocation.
    pub successes: u64,
    pub interrupted: bool,
    pub budget_exhausted: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub root: PathBuf,
    pub interrupted: bool,
    pub budget_exhausted: bool,
    pub reports: Vec<SubRunReport>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue a prepared run directory instead of creating one.
    pub resume: bool,
    /// Concurrent worker processes for independent sub-runs.
    pub jobs: usize,
    /// Run only the named sub-run of an already prepared directory; set by
    /// worker processes.
    pub only: Option<String>,
    /// Forwarded to worker processes so they do not echo episodes.
    pub quiet: bool,
}

pub fn load_run_config(root: &Path) -> Result<RunConfig> {
    RunConfig::load(&root.join(RUN_CONFIG_FILE))
}

fn write_run_manifest(root: &Path, cfg: &RunConfig, inst: &SykInstance) -> Result<()> {
    let mut m = String::new();
    m.push_str("{\n");
    m.push_str("  \"version\": 1,\n");
    m.push_str(&format!("  \"majoranas\": {},\n", inst.majorana_count()));
    m.push_str(&format!("  \"instance_seed\": {},\n", inst.seed()));
    m.push_str(&format!("  \"num_qubits\": {},\n", inst.num_qubits()));
    let betas: Vec<String> = cfg.betas.iter().map(|b| json_num(*b)).collect();
    m.push_str(&format!("  \"betas\": [{}],\n", betas.join(", ")));
    let seeds: Vec<String> = cfg.agent.seeds.iter().map(|s| s.to_string()).collect();
    m.push_str(&format!("  \"agent_seeds\": [{}],\n", seeds.join(", ")));
    let subs: Vec<String> =
        sub_run_specs(cfg).iter().map(|s| json_string(&s.dir_name())).collect();
    m.push_str(&format!("  \"sub_runs\": [{}]\n", subs.join(", ")));
    m.push_str("}\n");
    formats::write_atomic(&root.join(RUN_MANIFEST_FILE), m.as_bytes())
}

/// Creates the run directory, the resolved config, the pinned instance
/// file, and the manifest. Fails if the directory already holds a run.
fn prepare_run_dir(cfg: &RunConfig, root: &Path) -> Result<RunConfig> {
    if root.join(RUN_CONFIG_FILE).exists() {
        bail!(
            "{} already holds a run; resume it or choose a fresh directory",
            root.display()
        );
    }
    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let resolved = cfg.resolved()?;
    let inst = cfg.instance()?;
    formats::write_atomic(&root.join(RUN_CONFIG_FILE), resolved.to_toml()?.as_bytes())?;
    formats::save_instance(&root.join(INSTANCE_FILE), &inst)?;
    write_run_manifest(root, &resolved, &inst)?;
    Ok(resolved)
}

/// Runs (or continues) training for every configured sub-run.
pub fn train(
    cfg: &RunConfig,
    root: &Path,
    opts: &TrainOptions,
    interrupt: &AtomicBool,
    on_event: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<TrainOutcome> {
    let cfg = if opts.resume || opts.only.is_some() {
        if !root.join(RUN_CONFIG_FILE).is_file() {
            bail!("{} does not hold a run (no {RUN_CONFIG_FILE})", root.display());
        }
        cfg.clone()
    } else {
        prepare_run_dir(cfg, root)?
    };

    let mut specs = sub_run_specs(&cfg);
    if let Some(only) = &opts.only {
        specs.retain(|s| s.dir_name() == *only);
        if specs.is_empty() {
            bail!("no sub-run named {only:?} in this configuration");
        }
    }

    let deadline = cfg
        .wall_clock_hours
        .map(|h| Instant::now() + Duration::from_secs_f64(h * 3600.0));

    if opts.jobs > 1 && specs.len() > 1 && opts.only.is_none() {
        return spawn_workers(&cfg, root, &specs, opts, interrupt);
    }

    let mut outcome = TrainOutcome {
        root: root.to_path_buf(),
        interrupted: false,
        budget_exhausted: false,
        reports: Vec::new(),
    };
    for spec in &specs {
        if interrupt.load(Ordering::SeqCst) {
            outcome.interrupted = true;
            break;
        }
        let report = run_sub(&cfg, root, spec, deadline, interrupt, on_event)?;
        outcome.interrupted |= report.interrupted;
        outcome.budget_exhausted |= report.budget_exhausted;
        let stop = report.interrupted;
        outcome.reports.push(report);
        if stop {
            break;
        }
    }
    Ok(outcome)
}

fn open_append(path: &Path) -> Result<File> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn snapshot(env: &SykEnv, trainer: &DdqnTrainer, elapsed_seconds: f64) -> CheckpointState {
    let (exploration, replay) = trainer.rng_positions();
    let (m, v) = trainer.adam().state();
    CheckpointState {
        episodes_started: env.episodes_started(),
        env_theta_rng_position: env.theta_rng_position(),
        env_steps: trainer.env_steps(),
        train_steps: trainer.train_steps(),
        exploration_rng_position: exploration,
        replay_rng_position: replay,
        replay_cursor: trainer.memory().cursor(),
        adam_step: trainer.adam().step_count(),
        elapsed_seconds,
        d_max: env.config().d_max,
        num_qubits: env.num_qubits(),
        online: trainer.online().params().to_vec(),
        target: trainer.target().params().to_vec(),
        adam_m: m.to_vec(),
        adam_v: v.to_vec(),
        transitions: trainer.memory().iter().cloned().collect(),
    }
}

fn run_sub(
    cfg: &RunConfig,
    root: &Path,
    spec: &SubRunSpec,
    deadline: Option<Instant>,
    interrupt: &AtomicBool,
    on_event: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<SubRunReport> {
    let dir = root.join(spec.dir_name());
    fs::create_dir_all(dir.join("circuits"))
        .with_context(|| format!("creating {}", dir.display()))?;
    let inst = formats::load_instance(&root.join(INSTANCE_FILE))?;
    let n = inst.num_qubits();
    let h = inst.hamiltonian()?;
    let env_cfg = cfg.env_config(spec.beta, n)?;
    let d_max = env_cfg.d_max;
    let mut env = SykEnv::new(h, env_cfg, spec.seed)?;
    let net_spec = cfg.network_spec(n, env.action_space().len());

    let ckdir = dir.join("checkpoint");
    let mut elapsed_before = 0.0;
    let mut trainer = if formats::checkpoint_exists(&ckdir) {
        let ck = formats::load_checkpoint(&ckdir)?;
        if ck.num_qubits != n || ck.d_max != d_max {
            bail!("checkpoint geometry does not match the configuration");
        }
        elapsed_before = ck.elapsed_seconds;
        env.restore_position(ck.episodes_started, ck.env_theta_rng_position);
        for f in METRIC_FILES {
            formats::truncate_jsonl(&dir.join(f), ck.episodes_started)?;
        }
        DdqnTrainer::restore(
            &net_spec,
            cfg.ddqn_config(),
            spec.seed,
            &ck.online,
            &ck.target,
            ck.adam_step,
            ck.adam_m,
            ck.adam_v,
            ck.env_steps,
            ck.train_steps,
            (ck.exploration_rng_position, ck.replay_rng_position),
            ck.transitions,
            ck.replay_cursor,
        )?
    } else {
        DdqnTrainer::new(&net_spec, cfg.ddqn_config(), spec.seed)?
    };

    on_event(TrainEvent::SubRunStarted {
        spec,
        dir: &dir,
        resumed_at: env.episodes_started(),
    });

    let mut steps_file = open_append(&dir.join("steps.jsonl"))?;
    let mut episodes_file = open_append(&dir.join("episodes.jsonl"))?;
    let mut candidates_file = open_append(&dir.join("candidates.jsonl"))?;

    let start = Instant::now();
    let mut interrupted = false;
    let mut budget_exhausted = false;
    let mut successes = 0u64;

    while env.episodes_started() < cfg.agent.max_episodes {
        if interrupt.load(Ordering::SeqCst) {
            interrupted = true;
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            budget_exhausted = true;
            break;
        }

        let mut step_lines = String::new();
        let mut last_epsilon = f64::NAN;
        let mut terminal_reward = f64::NAN;
        let summary = run_episode(&mut env, &mut trainer, &SerialExecutor, |rec| {
            last_epsilon = rec.epsilon;
            terminal_reward = rec.reward;
            step_lines.push_str(&formats::step_jsonl(rec));
            step_lines.push('\n');
        })?;
        steps_file.write_all(step_lines.as_bytes())?;
        let mut line = formats::episode_jsonl(
            summary.episode,
            summary.steps,
            summary.total_reward,
            terminal_reward,
            summary.final_free_energy_error,
            summary.final_fidelity,
            summary.cnot_count,
            summary.gate_count,
            last_epsilon,
            summary.success,
        );
        line.push('\n');
        episodes_file.write_all(line.as_bytes())?;

        if let Some(c) = &summary.candidate {
            let file_name = format!("circuits/episode_{:06}.txt", summary.episode);
            formats::save_circuit(&dir.join(&file_name), &c.circuit)?;
            let reference = env.reference();
            let mut line = formats::candidate_jsonl(&CandidateLine {
                episode: summary.episode,
                free_energy: c.eval.free_energy.unwrap_or(f64::NAN),
                energy: c.eval.energy,
                entropy: c.eval.entropy,
                fidelity: c.eval.fidelity.unwrap_or(f64::NAN),
                free_energy_error: c.free_energy_error,
                energy_error: (c.eval.energy - reference.energy()).abs(),
                entropy_error: (c.eval.entropy - reference.entropy()).abs(),
                cnot_count: c.circuit.cnot_count(),
                gate_count: c.circuit.gate_count(),
                success: summary.success,
                theta: c.theta.clone(),
                circuit_file: file_name,
            });
            line.push('\n');
            candidates_file.write_all(line.as_bytes())?;
        }
        if summary.success {
            successes += 1;
        }
        steps_file.flush()?;
        episodes_file.flush()?;
        candidates_file.flush()?;
        on_event(TrainEvent::EpisodeFinished { spec, summary: &summary, epsilon: last_epsilon });

        if env.episodes_started() % cfg.agent.checkpoint_every == 0 {
            let elapsed = elapsed_before + start.elapsed().as_secs_f64();
            formats::save_checkpoint(&ckdir, &snapshot(&env, &trainer, elapsed))?;
        }
    }

    let elapsed = elapsed_before + start.elapsed().as_secs_f64();
    formats::save_checkpoint(&ckdir, &snapshot(&env, &trainer, elapsed))?;

    let report = SubRunReport {
        seed: spec.seed,
        beta: spec.beta,
        dir: dir.clone(),
        episodes_done: env.episodes_started(),
        successes,
        interrupted,
        budget_exhausted,
        elapsed_seconds: elapsed,
    };
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!("  \"seed\": {},\n", report.seed));
    s.push_str(&format!("  \"beta\": {},\n", json_num(report.beta)));
    s.push_str(&format!("  \"episodes_done\": {},\n", report.episodes_done));
    s.push_str(&format!("  \"successes_this_invocation\": {},\n", report.successes));
    s.push_str(&format!("  \"interrupted\": {},\n", report.interrupted));
    s.push_str(&format!("  \"budget_exhausted\": {},\n", report.budget_exhausted));
    s.push_str(&format!("  \"elapsed_seconds\": {}\n", json_num(report.elapsed_seconds)));
    s.push_str("}\n");
    formats::write_atomic(&dir.join("summary.json"), s.as_bytes())?;
    on_event(TrainEvent::SubRunFinished { report: &report });
    Ok(report)
}

/// Schedules sub-runs across worker processes, at most `jobs` at a time.
///
/// Each worker re-invokes this binary with `--internal-sub`, keeping every
/// run single-threaded internally.
fn spawn_workers(
    cfg: &RunConfig,
    root: &Path,
    specs: &[SubRunSpec],
    opts: &TrainOptions,
    interrupt: &AtomicBool,
) -> Result<TrainOutcome> {
    let exe = std::env::current_exe().context("locating the current executable")?;
    let mut pending: VecDeque<&SubRunSpec> = specs.iter().collect();
    let mut running: Vec<(Child, String)> = Vec::new();
    let mut interrupted = false;
    let mut failed: Option<String> = None;

    loop {
        while running.len() < opts.jobs {
            let Some(spec) = pending.pop_front() else { break };
            if interrupt.load(Ordering::SeqCst) {
                interrupted = true;
                pending.clear();
                break;
            }
            let mut cmd = Command::new(&exe);
            cmd.arg("train")
                .arg("--out")
                .arg(root)
                .arg("--internal-sub")
                .arg(spec.dir_name())
                .stdin(Stdio::null());
            if opts.quiet {
                cmd.arg("--quiet");
            }
            let child = cmd
                .spawn()
                .with_context(|| format!("spawning worker for {}", spec.dir_name()))?;
            running.push((child, spec.dir_name()));
        }
        if running.is_empty() {
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
        let mut still = Vec::new();
        for (mut child, name) in running {
            match child.try_wait()? {
                None => still.push((child, name)),
                Some(status) => match status.code() {
                    Some(0) => {}
                    Some(4) => interrupted = true,
                    code => {
                        failed.get_or_insert(format!(
                            "worker for {name} exited with status {code:?}"
                        ));
                        pending.clear();
                    }
                },
            }
        }
        running = still;
        if interrupt.load(Ordering::SeqCst) {
            interrupted = true;
            pending.clear();
        }
    }
    if let Some(msg) = failed {
        bail!("{msg}");
    }

    let mut reports = Vec::new();
    let mut budget_exhausted = false;
    for spec in specs {
        let path = root.join(spec.dir_name()).join("summary.json");
        if !path.is_file() {
            continue;
        }
        let v: Value = serde_json::from_str(&fs::read_to_string(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let report = SubRunReport {
            seed: spec.seed,
            beta: spec.beta,
            dir: root.join(spec.dir_name()),
            episodes_done: v["episodes_done"].as_u64().unwrap_or(0),
            successes: v["successes_this_invocation"].as_u64().unwrap_or(0),
            interrupted: v["interrupted"].as_bool().unwrap_or(false),
            budget_exhausted: v["budget_exhausted"].as_bool().unwrap_or(false),
            elapsed_seconds: v["elapsed_seconds"].as_f64().unwrap_or(0.0),
        };
        budget_exhausted |= report.budget_exhausted;
        reports.push(report);
    }
    // The config the workers trained under came from the run directory, so
    // it is authoritative here.
    let _ = cfg;
    Ok(TrainOutcome {
        root: root.to_path_buf(),
        interrupted,
        budget_exhausted,
        reports,
    })
}

// ---------------------------------------------------------------------------
// Filtering

/// The selected candidate with its provenance.
#[derive(Debug, Clone)]
pub struct BestCandidate {
    pub sub_run: String,
    pub line: CandidateLine,
    pub score: f64,
    /// Circuit file path relative to the run root.
    pub circuit: String,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub report_path: PathBuf,
    pub energy_weight: f64,
    pub entropy_weight: f64,
    pub considered: usize,
    pub best: Option<BestCandidate>,
}

fn candidate_sources(run_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    if run_dir.join("candidates.jsonl").is_file() {
        return Ok(vec![(String::new(), run_dir.to_path_buf())]);
    }
    let mut subs = Vec::new();
    for entry in fs::read_dir(run_dir).with_context(|| format!("listing {}", run_dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() && path.join("candidates.jsonl").is_file() {
            subs.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    subs.sort();
    Ok(subs)
}

fn find_run_config(run_dir: &Path) -> Result<RunConfig> {
    for base in [run_dir, run_dir.parent().unwrap_or(run_dir)] {
        let p = base.join(RUN_CONFIG_FILE);
        if p.is_file() {
            return RunConfig::load(&p);
        }
    }
    bail!("no {RUN_CONFIG_FILE} found at or above {}", run_dir.display());
}

/// Scores every stored candidate and reports the minimizer.
pub fn filter_run(
    run_dir: &Path,
    energy_weight: Option<f64>,
    entropy_weight: Option<f64>,
) -> Result<FilterOutcome> {
    let cfg = find_run_config(run_dir)?;
    let (wa_default, wb_default) = cfg.filter_weights(cfg.instance.majoranas)?;
    let wa = energy_weight.unwrap_or(wa_default);
    let wb = entropy_weight.unwrap_or(wb_default);

    let mut lines: Vec<(String, CandidateLine)> = Vec::new();
    for (name, dir) in candidate_sources(run_dir)? {
        for line in formats::read_candidates(&dir.join("candidates.jsonl"))? {
            lines.push((name.clone(), line));
        }
    }
    let records: Vec<CandidateRecord> = lines.iter().map(|(_, l)| l.to_record()).collect();
    let best = filter_best(&records, wa, wb).map(|i| {
        let (sub, line) = &lines[i];
        let circuit = if sub.is_empty() {
            line.circuit_file.clone()
        } else {
            format!("{sub}/{}", line.circuit_file)
        };
        BestCandidate {
            sub_run: sub.clone(),
            line: line.clone(),
            score: records[i].score(wa, wb),
            circuit,
        }
    });

    let mut report = String::new();
    report.push_str("{\n");
    report.push_str(&format!(
        "  \"weights\": {{\"energy\": {}, \"entropy\": {}}},\n",
        json_num(wa),
        json_num(wb)
    ));
    report.push_str(&format!("  \"considered\": {},\n", lines.len()));
    match &best {
        None => report.push_str("  \"best\": null\n"),
        Some(b) => {
            report.push_str("  \"best\": {\n");
            report.push_str(&format!("    \"sub_run\": {},\n", json_string(&b.sub_run)));
            report.push_str(&format!("    \"episode\": {},\n", b.line.episode));
            report.push_str(&format!("    \"score\": {},\n", json_num(b.score)));
            report.push_str(&format!("    \"f_error\": {},\n", json_num(b.line.free_energy_error)));
            report.push_str(&format!("    \"e_error\": {},\n", json_num(b.line.energy_error)));
            report.push_str(&format!("    \"s_error\": {},\n", json_num(b.line.entropy_error)));
            report.push_str(&format!("    \"Fid\": {},\n", json_num(b.line.fidelity)));
            report.push_str(&format!("    \"cnot_count\": {},\n", b.line.cnot_count));
            report.push_str(&format!("    \"gate_count\": {},\n", b.line.gate_count));
            report.push_str(&format!("    \"success\": {},\n", b.line.success));
            report.push_str(&format!("    \"circuit\": {}\n", json_string(&b.circuit)));
            report.push_str("  }\n");
        }
    }
    report.push_str("}\n");
    let report_path = run_dir.join("filter_report.json");
    formats::write_atomic(&report_path, report.as_bytes())?;

    Ok(FilterOutcome {
        report_path,
        energy_weight: wa,
        entropy_weight: wb,
        considered: lines.len(),
        best,
    })
}

// ---------------------------------------------------------------------------
// CNOT benchmarking

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub majoranas: usize,
    pub baseline_cnots: usize,
    pub rl_cnots: usize,
    pub improvement: f64,
    pub instance: String,
    pub circuit: String,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub fitted: bool,
    pub out_dir: PathBuf,
}

fn fit_csv(points: &[BandPoint], data: &[(f64, f64)]) -> String {
    let mut out = String::from("x,y,fit,lower,upper\n");
    for p in points {
        let y = data
            .iter()
            .find(|(x, _)| *x == p.x)
            .map(|(_, y)| json_num(*y))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{y},{},{},{}\n",
            json_num(p.x),
            json_num(p.y),
            json_num(p.lower),
            json_num(p.upper)
        ));
    }
    out
}

fn fit_summary_json(name: &str, fit: &CurveFit) -> String {
    let params: Vec<String> = fit.params.iter().map(|p| json_num(*p)).collect();
    format!(
        "  \"{name}\": {{\"params\": [{}], \"sse\": {}, \"dof\": {}, \"degenerate\": {}}}",
        params.join(", "),
        json_num(fit.sse),
        fit.dof,
        fit.degenerate
    )
}

/// Compares RL circuits against the one-layer Trotter baseline and, given
/// enough distinct sizes, fits the RL gate-count scaling with confidence
/// bands.
pub fn bench(pairs: &[(PathBuf, PathBuf)], layers: usize, out_dir: &Path) -> Result<BenchOutcome> {
    if pairs.is_empty() {
        bail!("bench needs at least one instance/circuit pair");
    }
    if layers == 0 {
        bail!("layers must be positive");
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let mut rows = Vec::new();
    for (inst_path, circ_path) in pairs {
        let inst = formats::load_instance(inst_path)?;
        let circuit = formats::load_circuit(circ_path)?;
        if circuit.num_qubits() != inst.num_qubits() {
            bail!(
                "{} is a {}-qubit circuit but {} has {} qubits",
                circ_path.display(),
                circuit.num_qubits(),
                inst_path.display(),
                inst.num_qubits()
            );
        }
        let h = inst.hamiltonian()?;
        let baseline = trotter_cnot_count(&h, layers);
        let rl = circuit.cnot_count();
        rows.push(BenchRow {
            majoranas: inst.majorana_count(),
            baseline_cnots: baseline,
            rl_cnots: rl,
            improvement: cnot_improvement(baseline, rl),
            instance: inst_path.display().to_string(),
            circuit: circ_path.display().to_string(),
        });
    }
    rows.sort_by(|a, b| (a.majoranas, &a.instance).cmp(&(b.majoranas, &b.instance)));

    let mut csv = String::from("N,baseline_cnots,rl_cnots,improvement\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            r.majoranas,
            r.baseline_cnots,
            r.rl_cnots,
            json_num(r.improvement)
        ));
    }
    formats::write_atomic(&out_dir.join("improvement.csv"), csv.as_bytes())?;

    let mut md = String::new();
    md.push_str(&format!("Trotter baseline uses {layers} layer(s).\n\n"));
    md.push_str("| N | Trotter CNOTs | RL CNOTs | improvement |\n");
    md.push_str("| --- | --- | --- | --- |\n");
    for r in &rows {
        md.push_str(&format!(
            "| {} | {} | {} | {:.2} |\n",
            r.majoranas, r.baseline_cnots, r.rl_cnots, r.improvement
        ));
    }
    formats::write_atomic(&out_dir.join("improvement.md"), md.as_bytes())?;

    let data: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.majoranas as f64, r.rl_cnots as f64)).collect();
    let xs: Vec<f64> = data.iter().map(|d| d.0).collect();
    let ys: Vec<f64> = data.iter().map(|d| d.1).collect();
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    // Band grids extend past the data so the widening tails are visible.
    let grid: Vec<f64> = {
        let lo = *distinct.first().unwrap() as i64;
        let hi = *distinct.last().unwrap() as i64 + 4;
        (lo..=hi).map(|x| x as f64).collect()
    };

    let mut fit_summaries = Vec::new();
    let mut fitted = false;
    if distinct.len() >= 4 && xs.len() >= 5 {
        let fit = fit_cubic(&xs, &ys)?;
        let band = cubic_band(&fit, &grid, 0.95)?;
        formats::write_atomic(&out_dir.join("cubic_fit.csv"), fit_csv(&band, &data).as_bytes())?;
        fit_summaries.push(fit_summary_json("cubic", &fit));
        fitted = true;
    }
    if distinct.len() >= 3 && xs.len() >= 4 {
        let fit = fit_exponential(&xs, &ys)?;
        let band = exponential_band(&fit, &grid, 0.95)?;
        formats::write_atomic(
            &out_dir.join("exponential_fit.csv"),
            fit_csv(&band, &data).as_bytes(),
        )?;
        fit_summaries.push(fit_summary_json("exponential", &fit));
        fitted = true;
    }

    let mut report = String::new();
    report.push_str("{\n");
    report.push_str(&format!("  \"layers\": {layers},\n"));
    report.push_str("  \"rows\": [\n");
    let last = rows.len() - 1;
    for (k, r) in rows.iter().enumerate() {
        let comma = if k == last { "" } else { "," };
        report.push_str(&format!(
            "    {{\"N\": {}, \"baseline_cnots\": {}, \"rl_cnots\": {}, \
             \"improvement\": {}, \"instance\": {}, \"circuit\": {}}}{comma}\n",
            r.majoranas,
            r.baseline_cnots,
            r.rl_cnots,
            json_num(r.improvement),
            json_string(&r.instance),
            json_string(&r.circuit)
        ));
    }
    report.push_str("  ]");
    for s in &fit_summaries {
        report.push_str(",\n");
        report.push_str(s);
    }
    report.push_str("\n}\n");
    formats::write_atomic(&out_dir.join("bench_report.json"), report.as_bytes())?;

    Ok(BenchOutcome { rows, fitted, out_dir: out_dir.to_path_buf() })
}

// ---------------------------------------------------------------------------
// Standalone circuit evaluation

#[derive(Debug, Clone)]
pub struct CircuitEvaluation {
    pub json: String,
    pub free_energy: f64,
    pub fidelity: Option<f64>,
}

/// Evaluates a circuit file against an instance at one beta.
///
/// Without a fixed angle file the entropy-circuit angles are re-optimized
/// (the expectation circuit's stored angles are kept as the warm start).
pub fn evaluate_circuit(
    inst: &SykInstance,
    circuit: &ExpectationCircuit,
    beta: f64,
    noisy: bool,
    budget: usize,
    seed: u64,
    theta: Option<Vec<f64>>,
) -> Result<CircuitEvaluation> {
    let n = inst.num_qubits();
    if circuit.num_qubits() != n {
        bail!("circuit register ({} qubits) does not match the instance ({n})",
            circuit.num_qubits());
    }
    let h = inst.hamiltonian()?;
    let noise = NoiseModel { enabled: noisy, ..NoiseModel::hardware_default() };
    let protocol = Protocol::new(
        EntropyCircuit::new(n, sykrl_core::vqtsp::Entangler::CyclicRing)?,
        h.clone(),
        beta,
        noise,
    )?;

    let (theta, circuit, evaluations) = match theta {
        Some(t) => (t, circuit.clone(), 0),
        None => {
            let cfg = OptimizerConfig { max_evaluations: budget, seed, ..Default::default() };
            let m = protocol.minimize_from_random_start(circuit, seed, &cfg)?;
            (m.theta, m.circuit, m.optimizer.evaluations)
        }
    };

    let reference = if n <= MAX_DENSE_QUBITS {
        Some(ThermalReference::new(&h, beta)?)
    } else {
        None
    };
    let eval = protocol.evaluate(&theta, &circuit, reference.as_ref())?;
    let free_energy = eval.free_energy.ok_or_else(|| anyhow!("beta must be positive"))?;
    let f_exact = reference.as_ref().and_then(|r| r.free_energy());

    let mut json = String::new();
    json.push_str("{\n");
    json.push_str(&format!("  \"beta\": {},\n", json_num(beta)));
    json.push_str(&format!("  \"num_qubits\": {n},\n"));
    json.push_str(&format!("  \"gate_count\": {},\n", circuit.gate_count()));
    json.push_str(&format!("  \"cnot_count\": {},\n", circuit.cnot_count()));
    json.push_str(&format!("  \"noisy\": {noisy},\n"));
    json.push_str(&format!("  \"energy\": {},\n", json_num(eval.energy)));
    json.push_str(&format!("  \"entropy\": {},\n", json_num(eval.entropy)));
    json.push_str(&format!("  \"free_energy\": {},\n", json_num(free_energy)));
    json.push_str(&format!(
        "  \"fidelity\": {},\n",
        eval.fidelity.map(json_num).unwrap_or_else(|| String::from("null"))
    ));
    json.push_str(&format!(
        "  \"free_energy_exact\": {},\n",
        f_exact.map(json_num).unwrap_or_else(|| String::from("null"))
    ));
    json.push_str(&format!(
        "  \"free_energy_error\": {},\n",
        f_exact.map(|f| json_num((free_energy - f).abs())).unwrap_or_else(|| String::from("null"))
    ));
    json.push_str(&format!("  \"optimizer_evaluations\": {evaluations},\n"));
    let theta_strs: Vec<String> = theta.iter().map(|t| json_num(*t)).collect();
    json.push_str(&format!("  \"theta\": [{}]\n", theta_strs.join(", ")));
    json.push_str("}\n");

    Ok(CircuitEvaluation { json, free_energy, fidelity: eval.fidelity })
}

// ---------------------------------------------------------------------------
// Exact thermal tables

/// Dense-diagonalization table of E, S, F per beta.
pub fn exact_table(inst: &SykInstance, betas: &[f64]) -> Result<String> {
    let h = inst.hamiltonian()?;
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"N\": {},\n", inst.majorana_count()));
    out.push_str(&format!("  \"num_qubits\": {},\n", inst.num_qubits()));
    out.push_str(&format!("  \"seed\": {},\n", inst.seed()));
    out.push_str("  \"rows\": [\n");
    let last = betas.len().saturating_sub(1);
    for (k, &beta) in betas.iter().enumerate() {
        if !beta.is_finite() || beta < 0.0 {
            bail!("beta must be finite and non-negative, got {beta}");
        }
        let r = ThermalReference::new(&h, beta)?;
        let f = r.free_energy().map(json_num).unwrap_or_else(|| String::from("null"));
        let comma = if k == last { "" } else { "," };
        out.push_str(&format!(
            "    {{\"beta\": {}, \"energy\": {}, \"entropy\": {}, \"free_energy\": {f}}}{comma}\n",
            json_num(beta),
            json_num(r.energy()),
            json_num(r.entropy())
        ));
    }
    out.push_str("  ]\n");
    out.push_str("}\n");
    Ok(out)
}
