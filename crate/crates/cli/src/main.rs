//! Command-line interface for SYK thermal-state circuit discovery.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sykrl::config::RunConfig;
use sykrl::driver::{self, TrainEvent, TrainOptions};
use sykrl::formats;
use sykrl_core::codec::encode;
use sykrl_core::error::Error as CoreError;
use sykrl_core::syk::SykInstance;

const EXIT_VALIDATION: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_INTERRUPTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "sykrl",
    version,
    about = "Discovers compact quantum circuits that prepare SYK thermal states",
    after_help = "Environment:\n  SYKRL_OUT_DIR  base directory for run output when none is given\n  SYKRL_JOBS     worker processes for independent (seed, beta) sub-runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw an SYK disorder realization and write it as JSON
    Generate {
        /// Number of Majorana fermions (even, at least 4)
        #[arg(short = 'N', long)]
        majoranas: usize,
        /// Disorder seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate exact thermal energy, entropy, and free energy per beta
    Exact {
        /// Instance JSON file
        #[arg(long)]
        instance: PathBuf,
        /// Inverse temperatures (beta = 0 rows report entropy only)
        #[arg(long, value_delimiter = ',', default_values_t = [5.2, 18.0, 35.0])]
        betas: Vec<f64>,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the circuit-growing agent over every configured (seed, beta)
    Train {
        /// Run configuration in TOML; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory (created fresh unless --resume)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue a run directory from its checkpoints
        #[arg(long)]
        resume: bool,
        /// Suppress per-episode output
        #[arg(long)]
        quiet: bool,
        /// Worker processes; overrides SYKRL_JOBS
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, hide = true)]
        internal_sub: Option<String>,
    },
    /// Score stored candidates and report the best circuit
    Filter {
        /// Run directory or one sub-run directory
        #[arg(long)]
        run: PathBuf,
        /// Energy-error weight; the configured default applies when omitted
        #[arg(long)]
        energy_weight: Option<f64>,
        /// Entropy-error weight; the configured default applies when omitted
        #[arg(long)]
        entropy_weight: Option<f64>,
    },
    /// Compare candidate circuits against the Trotter CNOT baseline
    Bench {
        /// Instance JSON files, one per --circuit
        #[arg(long, required = true)]
        instance: Vec<PathBuf>,
        /// Circuit text files, one per --instance
        #[arg(long, required = true)]
        circuit: Vec<PathBuf>,
        /// Trotter layers in the baseline
        #[arg(long, default_value_t = 1)]
        layers: usize,
        /// Output directory
        #[arg(long, default_value = "bench")]
        out: PathBuf,
    },
    /// Evaluate one circuit file against an instance at one beta
    RunCircuit {
        /// Instance JSON file
        #[arg(long)]
        instance: PathBuf,
        /// Circuit text file
        #[arg(long)]
        circuit: PathBuf,
        /// Inverse temperature
        #[arg(long)]
        beta: f64,
        /// Apply the hardware noise model
        #[arg(long)]
        noisy: bool,
        /// Optimizer evaluation budget for the entropy-circuit angles
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        /// Seed for the angle initialization
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file of fixed entropy-circuit angles; skips optimization
        #[arg(long)]
        theta: Option<PathBuf>,
        /// Output file; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let interrupt = Arc::new(AtomicBool::new(false));
    {
        let flag = Arc::clone(&interrupt);
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));
    }
    match run(cli, &interrupt) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e))
        }
    }
}

/// Maps failures to exit codes: capacity limits get 3, everything else
/// (bad arguments, malformed files, failed validation) gets 2.
fn classify(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            if matches!(core, CoreError::Capacity(_)) {
                return EXIT_CAPACITY;
            }
        }
    }
    EXIT_VALIDATION
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => formats::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli, interrupt: &AtomicBool) -> Result<u8> {
    match cli.command {
        Cmd::Generate { majoranas, seed, out } => {
            let inst = SykInstance::generate(majoranas, seed)?;
            emit(out.as_deref(), &formats::write_instance(&inst))?;
            Ok(0)
        }
        Cmd::Exact { instance, betas, out } => {
            let inst = formats::load_instance(&instance)?;
            let table = driver::exact_table(&inst, &betas)?;
            emit(out.as_deref(), &table)?;
            Ok(0)
        }
        Cmd::Train { config, out, resume, quiet, jobs, internal_sub } => {
            train_command(config, out, resume, quiet, jobs, internal_sub, interrupt)
        }
        Cmd::Filter { run, energy_weight, entropy_weight } => {
            let outcome = driver::filter_run(&run, energy_weight, entropy_weight)?;
            println!(
                "scored {} candidates with weights (energy {}, entropy {})",
                outcome.considered, outcome.energy_weight, outcome.entropy_weight
            );
            match &outcome.best {
                Some(b) => println!(
                    "best: episode {} of {} (score {:.6e}, F error {:.3e}, fidelity {:.4}, \
                     {} CNOTs) -> {}",
                    b.line.episode,
                    if b.sub_run.is_empty() { "this run" } else { &b.sub_run },
                    b.score,
                    b.line.free_energy_error,
                    b.line.fidelity,
                    b.line.cnot_count,
                    b.circuit
                ),
                None => println!("no candidates recorded yet"),
            }
            println!("report: {}", outcome.report_path.display());
            Ok(0)
        }
        Cmd::Bench { instance, circuit, layers, out } => {
            if instance.len() != circuit.len() {
                bail!(
                    "got {} --instance but {} --circuit arguments; they pair up one-to-one",
                    instance.len(),
                    circuit.len()
                );
            }
            let pairs: Vec<(PathBuf, PathBuf)> =
                instance.into_iter().zip(circuit).collect();
            let outcome = driver::bench(&pairs, layers, &out)?;
            for r in &outcome.rows {
                println!(
                    "N = {:>3}: {:>8} Trotter CNOTs vs {:>6} RL CNOTs (improvement {:.2})",
                    r.majoranas, r.baseline_cnots, r.rl_cnots, r.improvement
                );
            }
            if outcome.fitted {
                println!("scaling fits written alongside the tables");
            }
            println!("output: {}", outcome.out_dir.display());
            Ok(0)
        }
        Cmd::RunCircuit { instance, circuit, beta, noisy, budget, seed, theta, out } => {
            let inst = formats::load_instance(&instance)?;
            let circ = formats::load_circuit(&circuit)?;
            let theta = match theta {
                Some(p) => Some(formats::parse_theta(
                    &std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?,
                )?),
                None => None,
            };
            let eval = driver::evaluate_circuit(&inst, &circ, beta, noisy, budget, seed, theta)?;
            emit(out.as_deref(), &eval.json)?;
            Ok(0)
        }
    }
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn train_command(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    resume: bool,
    quiet: bool,
    jobs: Option<usize>,
    internal_sub: Option<String>,
    interrupt: &AtomicBool,
) -> Result<u8> {
    let jobs = match jobs {
        Some(j) => j,
        None => match std::env::var("SYKRL_JOBS") {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("SYKRL_JOBS is not a worker count: {v:?}"))?,
            Err(_) => 1,
        },
    };
    if jobs == 0 {
        bail!("worker count must be positive");
    }

    let (cfg, root) = if internal_sub.is_some() || resume {
        let root = out.ok_or_else(|| {
            anyhow::anyhow!("--out must name the run directory when resuming")
        })?;
        (driver::load_run_config(&root)?, root)
    } else {
        let cfg = match &config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let root = out
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| {
                env_path("SYKRL_OUT_DIR")
                    .unwrap_or_else(|| PathBuf::from("runs"))
                    .join(format!("run-N{}-s{}", cfg.instance.majoranas, cfg.instance.seed))
            });
        (cfg, root)
    };

    let opts = TrainOptions { resume, jobs, only: internal_sub, quiet };
    let mut on_event = |ev: TrainEvent<'_>| match ev {
        TrainEvent::SubRunStarted { spec, dir, resumed_at } => {
            if resumed_at > 0 {
                println!(
                    "sub-run {} resuming at episode {} ({})",
                    spec.dir_name(),
                    resumed_at,
                    dir.display()
                );
            } else {
                println!("sub-run {} starting ({})", spec.dir_name(), dir.display());
            }
        }
        TrainEvent::EpisodeFinished { spec, summary, epsilon } => {
            if !quiet {
                println!(
                    "[{}] episode {:>5}: steps {:>3} return {:>9.3} F_err {:.3e} \
                     fid {:.4} cnots {:>3} eps {:.4}{}",
                    spec.dir_name(),
                    summary.episode,
                    summary.steps,
                    summary.total_reward,
                    summary.final_free_energy_error,
                    summary.final_fidelity,
                    summary.cnot_count,
                    epsilon,
                    if summary.success { "  SUCCESS" } else { "" }
                );
            }
            if summary.success {
                if let Some(c) = &summary.candidate {
                    if let Ok(t) = encode(&c.circuit, c.circuit.gate_count().max(1)) {
                        println!("{}", formats::tensor_grid(&t));
                    }
                }
            }
        }
        TrainEvent::SubRunFinished { report } => {
            println!(
                "sub-run s{}_b{} done: {} episodes total, {} successes this invocation, \
                 {:.1} s elapsed",
                report.seed,
                report.beta,
                report.episodes_done,
                report.successes,
                report.elapsed_seconds
            );
        }
    };
    let outcome = driver::train(&cfg, &root, &opts, interrupt, &mut on_event)?;
    if outcome.interrupted {
        eprintln!("interrupted; checkpoints saved under {}", outcome.root.display());
        return Ok(EXIT_INTERRUPTED);
    }
    if outcome.budget_exhausted {
        println!("wall-clock budget reached; resume with --resume --out {}", root.display());
    }
    println!("run directory: {}", outcome.root.display());
    Ok(0)
}
