//! On-disk formats: instance and coupling-map JSON, circuit text files,
//! metrics JSONL, and binary training checkpoints.
//!
//! Every floating-point value that must round-trip is written with 17
//! significant digits, enough to recover the exact bits of an `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

use sykrl_core::agent::{StepRecord, Transition};
use sykrl_core::analysis::CandidateRecord;
use sykrl_core::backend::{CouplingMap, GateOp};
use sykrl_core::codec::CircuitTensor;
use sykrl_core::syk::{Coupling, SykInstance};
use sykrl_core::vqtsp::ExpectationCircuit;

/// Formats with 17 significant digits, the shortest width that restores
/// any finite `f64` exactly.
pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number for `x`, or `null` when it is not finite.
pub fn json_num(x: f64) -> String {
    if x.is_finite() {
        f17(x)
    } else {
        String::from("null")
    }
}

/// JSON string literal with the two escapes our payloads can need.
pub fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| anyhow!("missing field {key:?}"))
}

fn field_u64(v: &Value, key: &str) -> Result<u64> {
    field(v, key)?
        .as_u64()
        .ok_or_else(|| anyhow!("field {key:?} is not an unsigned integer"))
}

fn field_f64(v: &Value, key: &str) -> Result<f64> {
    let f = field(v, key)?;
    if f.is_null() {
        return Ok(f64::NAN);
    }
    f.as_f64().ok_or_else(|| anyhow!("field {key:?} is not a number"))
}

fn field_bool(v: &Value, key: &str) -> Result<bool> {
    field(v, key)?.as_bool().ok_or_else(|| anyhow!("field {key:?} is not a boolean"))
}

fn field_array<'a>(v: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    field(v, key)?.as_array().ok_or_else(|| anyhow!("field {key:?} is not an array"))
}

/// Writes through a temporary file so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SYK instance files

/// Serializes an instance as `{N, seed, couplings: [[i1, i2, i3, i4, J]]}`.
pub fn write_instance(inst: &SykInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"N\": {},", inst.majorana_count());
    let _ = writeln!(out, "  \"seed\": {},", inst.seed());
    let _ = writeln!(out, "  \"couplings\": [");
    let last = inst.couplings().len().saturating_sub(1);
    for (k, c) in inst.couplings().iter().enumerate() {
        let [i1, i2, i3, i4] = c.indices;
        let comma = if k == last { "" } else { "," };
        let _ = writeln!(out, "    [{i1}, {i2}, {i3}, {i4}, {}]{comma}", f17(c.value));
    }
    let _ = writeln!(out, "  ]");
    let _ = writeln!(out, "}}");
    out
}

pub fn parse_instance(text: &str) -> Result<SykInstance> {
    let v: Value = serde_json::from_str(text).context("instance file is not valid JSON")?;
    let n = field_u64(&v, "N")? as usize;
    let seed = field_u64(&v, "seed")?;
    let mut couplings = Vec::new();
    for (k, row) in field_array(&v, "couplings")?.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == 5)
            .ok_or_else(|| anyhow!("coupling {k} is not a 5-element array"))?;
        let mut indices = [0usize; 4];
        for (slot, idx) in indices.iter_mut().zip(&row[..4]) {
            *slot = idx
                .as_u64()
                .ok_or_else(|| anyhow!("coupling {k} has a non-integer index"))?
                as usize;
        }
        let value = row[4]
            .as_f64()
            .ok_or_else(|| anyhow!("coupling {k} has a non-numeric strength"))?;
        couplings.push(Coupling { indices, value });
    }
    Ok(SykInstance::from_parts(n, seed, 1.0, couplings)?)
}

pub fn save_instance(path: &Path, inst: &SykInstance) -> Result<()> {
    write_atomic(path, write_instance(inst).as_bytes())
}

pub fn load_instance(path: &Path) -> Result<SykInstance> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Coupling-map files

/// Serializes a map as `{name, n, pairs: [[control, target]]}`.
pub fn write_coupling_map(map: &CouplingMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"name\": {},", json_string(map.name()));
    let _ = writeln!(out, "  \"n\": {},", map.num_qubits());
    let _ = writeln!(out, "  \"pairs\": [");
    let last = map.pairs().len().saturating_sub(1);
    for (k, &(c, t)) in map.pairs().iter().enumerate() {
        let comma = if k == last { "" } else { "," };
        let _ = writeln!(out, "    [{c}, {t}]{comma}");
    }
    let _ = writeln!(out, "  ]");
    let _ = writeln!(out, "}}");
    out
}

pub fn parse_coupling_map(text: &str) -> Result<CouplingMap> {
    let v: Value = serde_json::from_str(text).context("coupling map is not valid JSON")?;
    let name = field(&v, "name")?
        .as_str()
        .ok_or_else(|| anyhow!("field \"name\" is not a string"))?;
    let n = field_u64(&v, "n")? as usize;
    let mut pairs = Vec::new();
    for (k, row) in field_array(&v, "pairs")?.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == 2)
            .ok_or_else(|| anyhow!("pair {k} is not a 2-element array"))?;
        let c = row[0].as_u64().ok_or_else(|| anyhow!("pair {k} control is not an integer"))?;
        let t = row[1].as_u64().ok_or_else(|| anyhow!("pair {k} target is not an integer"))?;
        pairs.push((c as usize, t as usize));
    }
    Ok(CouplingMap::new(name, n, pairs)?)
}

pub fn load_coupling_map(path: &Path) -> Result<CouplingMap> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_coupling_map(&text).with_context(|| format!("parsing {}", path.display()))
}

// ---------------------------------------------------------------------------
// Circuit text files

/// One gate per line: `RX q angle`, `RY q angle`, `RZ q angle`,
/// `CNOT control target`. A leading `# qubits n` comment pins the register
/// width; other `#` lines and blank lines are ignored.
pub fn write_circuit(circuit: &ExpectationCircuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# qubits {}", circuit.num_qubits());
    for g in circuit.gates() {
        match *g {
            GateOp::Rotation { axis, qubit, angle } => {
                let _ = writeln!(out, "{} {qubit} {}", axis.name(), f17(angle));
            }
            GateOp::Cnot { control, target } => {
                let _ = writeln!(out, "CNOT {control} {target}");
            }
        }
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<ExpectationCircuit> {
    let mut declared: Option<usize> = None;
    let mut gates = Vec::new();
    let mut max_qubit = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let words: Vec<&str> = comment.split_whitespace().collect();
            if declared.is_none() && words.len() == 2 && words[0] == "qubits" {
                declared = Some(
                    words[1]
                        .parse()
                        .with_context(|| format!("line {lineno}: bad qubit count"))?,
                );
            }
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let gate = match words[0].to_ascii_uppercase().as_str() {
            name @ ("RX" | "RY" | "RZ") => {
                if words.len() != 3 {
                    bail!("line {lineno}: rotations take a qubit and an angle");
                }
                let qubit: usize = words[1]
                    .parse()
                    .with_context(|| format!("line {lineno}: bad qubit index"))?;
                let angle: f64 = words[2]
                    .parse()
                    .with_context(|| format!("line {lineno}: bad angle"))?;
                max_qubit = max_qubit.max(qubit);
                match name {
                    "RX" => GateOp::rx(qubit, angle),
                    "RY" => GateOp::ry(qubit, angle),
                    _ => GateOp::rz(qubit, angle),
                }
            }
            "CNOT" => {
                if words.len() != 3 {
                    bail!("line {lineno}: CNOT takes a control and a target");
                }
                let control: usize = words[1]
                    .parse()
                    .with_context(|| format!("line {lineno}: bad control index"))?;
                let target: usize = words[2]
                    .parse()
                    .with_context(|| format!("line {lineno}: bad target index"))?;
                max_qubit = max_qubit.max(control).max(target);
                GateOp::cnot(control, target)
            }
            other => bail!("line {lineno}: unknown gate {other:?}"),
        };
        gates.push(gate);
    }
    let n = declared.unwrap_or(max_qubit + 1);
    Ok(ExpectationCircuit::from_gates(n, gates)?)
}

pub fn save_circuit(path: &Path, circuit: &ExpectationCircuit) -> Result<()> {
    write_atomic(path, write_circuit(circuit).as_bytes())
}

pub fn load_circuit(path: &Path) -> Result<ExpectationCircuit> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Parses a JSON array of angles.
pub fn parse_theta(text: &str) -> Result<Vec<f64>> {
    let v: Value = serde_json::from_str(text).context("angle file is not valid JSON")?;
    let arr = v.as_array().ok_or_else(|| anyhow!("angle file must hold a JSON array"))?;
    arr.iter()
        .enumerate()
        .map(|(k, x)| x.as_f64().ok_or_else(|| anyhow!("angle {k} is not a number")))
        .collect()
}

fn theta_json(theta: &[f64]) -> String {
    let mut out = String::from("[");
    for (k, t) in theta.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&json_num(*t));
    }
    out.push(']');
    out
}

// ---------------------------------------------------------------------------
// Metrics JSONL

/// Key set of one step record, in file order.
pub const STEP_KEYS: [&str; 11] = [
    "episode", "step", "action", "F", "E", "S", "Fid", "reward", "done", "cnot_count",
    "gate_count",
];

/// One training step as a JSONL line (no trailing newline).
pub fn step_jsonl(r: &StepRecord) -> String {
    format!(
        "{{\"episode\":{},\"step\":{},\"action\":{},\"F\":{},\"E\":{},\"S\":{},\"Fid\":{},\
         \"reward\":{},\"done\":{},\"cnot_count\":{},\"gate_count\":{}}}",
        r.episode,
        r.step,
        r.action,
        json_num(r.free_energy),
        json_num(r.energy),
        json_num(r.entropy),
        json_num(r.fidelity),
        json_num(r.reward),
        r.done,
        r.cnot_count,
        r.gate_count,
    )
}

/// One finished episode as a JSONL line (no trailing newline).
#[allow(clippy::too_many_arguments)]
pub fn episode_jsonl(
    episode: u64,
    steps: usize,
    total_reward: f64,
    terminal_reward: f64,
    f_error: f64,
    fidelity: f64,
    cnot_count: usize,
    gate_count: usize,
    epsilon: f64,
    success: bool,
) -> String {
    format!(
        "{{\"episode\":{episode},\"steps\":{steps},\"return\":{},\"terminal_reward\":{},\
         \"f_error\":{},\"fidelity\":{},\"cnot_count\":{cnot_count},\
         \"gate_count\":{gate_count},\"epsilon\":{},\"success\":{success}}}",
        json_num(total_reward),
        json_num(terminal_reward),
        json_num(f_error),
        json_num(fidelity),
        json_num(epsilon),
    )
}

/// One stored candidate circuit with its evaluation and file pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLine {
    pub episode: u64,
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub fidelity: f64,
    pub free_energy_error: f64,
    pub energy_error: f64,
    pub entropy_error: f64,
    pub cnot_count: usize,
    pub gate_count: usize,
    pub success: bool,
    pub theta: Vec<f64>,
    pub circuit_file: String,
}

impl CandidateLine {
    pub fn to_record(&self) -> CandidateRecord {
        CandidateRecord {
            episode: self.episode,
            free_energy_error: self.free_energy_error,
            energy_error: self.energy_error,
            entropy_error: self.entropy_error,
            fidelity: self.fidelity,
            cnot_count: self.cnot_count,
            gate_count: self.gate_count,
        }
    }
}

pub fn candidate_jsonl(c: &CandidateLine) -> String {
    format!(
        "{{\"episode\":{},\"F\":{},\"E\":{},\"S\":{},\"Fid\":{},\"f_error\":{},\
         \"e_error\":{},\"s_error\":{},\"cnot_count\":{},\"gate_count\":{},\
         \"success\":{},\"theta\":{},\"circuit\":{}}}",
        c.episode,
        json_num(c.free_energy),
        json_num(c.energy),
        json_num(c.entropy),
        json_num(c.fidelity),
        json_num(c.free_energy_error),
        json_num(c.energy_error),
        json_num(c.entropy_error),
        c.cnot_count,
        c.gate_count,
        c.success,
        theta_json(&c.theta),
        json_string(&c.circuit_file),
    )
}

pub fn parse_candidate_line(line: &str) -> Result<CandidateLine> {
    let v: Value = serde_json::from_str(line).context("candidate line is not valid JSON")?;
    let theta = field_array(&v, "theta")?
        .iter()
        .enumerate()
        .map(|(k, x)| x.as_f64().ok_or_else(|| anyhow!("theta[{k}] is not a number")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CandidateLine {
        episode: field_u64(&v, "episode")?,
        free_energy: field_f64(&v, "F")?,
        energy: field_f64(&v, "E")?,
        entropy: field_f64(&v, "S")?,
        fidelity: field_f64(&v, "Fid")?,
        free_energy_error: field_f64(&v, "f_error")?,
        energy_error: field_f64(&v, "e_error")?,
        entropy_error: field_f64(&v, "s_error")?,
        cnot_count: field_u64(&v, "cnot_count")? as usize,
        gate_count: field_u64(&v, "gate_count")? as usize,
        success: field_bool(&v, "success")?,
        theta,
        circuit_file: field(&v, "circuit")?
            .as_str()
            .ok_or_else(|| anyhow!("field \"circuit\" is not a string"))?
            .to_string(),
    })
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateLine>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            parse_candidate_line(l)
                .with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

/// Keeps only the JSONL lines whose `episode` field is at or below the
/// bound, the last episode the checkpoint fully reflects.
///
/// Used on resume so metrics written after the last checkpoint, by a run
/// that was killed rather than interrupted, cannot duplicate.
pub fn truncate_jsonl(path: &Path, last_episode: u64) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kept = String::with_capacity(text.len());
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line)
            .with_context(|| format!("malformed JSONL in {}", path.display()))?;
        if field_u64(&v, "episode")? <= last_episode {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    write_atomic(path, kept.as_bytes())
}

// ---------------------------------------------------------------------------
// Placement-tensor grid

/// Human-readable occupancy grid: one block per non-empty moment, CNOT
/// control rows first (`C0..`), then the three rotation rows.
pub fn tensor_grid(t: &CircuitTensor) -> String {
    let n = t.num_qubits();
    let mut out = String::new();
    let mut any = false;
    for d in 0..t.d_max() {
        if (0..t.num_rows()).all(|r| (0..n).all(|c| !t.get(d, r, c))) {
            continue;
        }
        any = true;
        let _ = writeln!(out, "moment {d}");
        for r in 0..t.num_rows() {
            let label = match r.checked_sub(n) {
                Some(0) => String::from("RX"),
                Some(1) => String::from("RY"),
                Some(2) => String::from("RZ"),
                _ => format!("C{r}"),
            };
            let cells: String =
                (0..n).map(|c| if t.get(d, r, c) { '#' } else { '.' }).collect();
            let _ = writeln!(out, "  {label:>3} {cells}");
        }
    }
    if !any {
        out.push_str("(empty circuit)\n");
    }
    out
}

// ---------------------------------------------------------------------------
// Training checkpoints

/// Everything needed to continue a training run bit-for-bit.
#[derive(Debug, Clone)]
pub struct CheckpointState {
    pub episodes_started: u64,
    pub env_theta_rng_position: u64,
    pub env_steps: u64,
    pub train_steps: u64,
    pub exploration_rng_position: u64,
    pub replay_rng_position: u64,
    pub replay_cursor: usize,
    pub adam_step: u64,
    pub elapsed_seconds: f64,
    pub d_max: usize,
    pub num_qubits: usize,
    pub online: Vec<f64>,
    pub target: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub transitions: Vec<Transition>,
}

const CHECKPOINT_VERSION: u64 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const PARAMS_FILE: &str = "params.bin";
const BUFFER_FILE: &str = "buffer.bin";

fn words_per_tensor(d_max: usize, num_qubits: usize) -> usize {
    let bits = d_max * (num_qubits + 3) * num_qubits;
    bits.div_ceil(64)
}

fn push_f64s(bytes: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
}

fn push_words(bytes: &mut Vec<u8>, words: &[u64]) {
    for w in words {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
}

fn take_f64(bytes: &[u8], off: &mut usize) -> Result<f64> {
    let end = *off + 8;
    let chunk = bytes.get(*off..end).ok_or_else(|| anyhow!("checkpoint truncated"))?;
    *off = end;
    Ok(f64::from_le_bytes(chunk.try_into().unwrap()))
}

fn take_u64(bytes: &[u8], off: &mut usize) -> Result<u64> {
    let end = *off + 8;
    let chunk = bytes.get(*off..end).ok_or_else(|| anyhow!("checkpoint truncated"))?;
    *off = end;
    Ok(u64::from_le_bytes(chunk.try_into().unwrap()))
}

fn take_u8(bytes: &[u8], off: &mut usize) -> Result<u8> {
    let b = *bytes.get(*off).ok_or_else(|| anyhow!("checkpoint truncated"))?;
    *off += 1;
    Ok(b)
}

fn push_option_f64(bytes: &mut Vec<u8>, x: Option<f64>) {
    bytes.push(x.is_some() as u8);
    bytes.extend_from_slice(&x.unwrap_or(0.0).to_le_bytes());
}

fn take_option_f64(bytes: &[u8], off: &mut usize) -> Result<Option<f64>> {
    let flag = take_u8(bytes, off)?;
    let x = take_f64(bytes, off)?;
    Ok((flag != 0).then_some(x))
}

/// Saves `manifest.json`, `params.bin` (online, target, Adam first and
/// second moments, each a flat run of little-endian `f64`), and
/// `buffer.bin` (replay transitions with bit-packed tensors).
pub fn save_checkpoint(dir: &Path, ck: &CheckpointState) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let param_count = ck.online.len();
    if ck.target.len() != param_count
        || ck.adam_m.len() != param_count
        || ck.adam_v.len() != param_count
    {
        bail!("checkpoint parameter blocks disagree in length");
    }
    let wpt = words_per_tensor(ck.d_max, ck.num_qubits);

    let mut manifest = String::new();
    let _ = writeln!(manifest, "{{");
    let _ = writeln!(manifest, "  \"version\": {CHECKPOINT_VERSION},");
    let _ = writeln!(manifest, "  \"episodes_started\": {},", ck.episodes_started);
    let _ = writeln!(manifest, "  \"env_theta_rng_position\": {},", ck.env_theta_rng_position);
    let _ = writeln!(manifest, "  \"env_steps\": {},", ck.env_steps);
    let _ = writeln!(manifest, "  \"train_steps\": {},", ck.train_steps);
    let _ =
        writeln!(manifest, "  \"exploration_rng_position\": {},", ck.exploration_rng_position);
    let _ = writeln!(manifest, "  \"replay_rng_position\": {},", ck.replay_rng_position);
    let _ = writeln!(manifest, "  \"replay_cursor\": {},", ck.replay_cursor);
    let _ = writeln!(manifest, "  \"adam_step\": {},", ck.adam_step);
    let _ = writeln!(manifest, "  \"elapsed_seconds\": {},", json_num(ck.elapsed_seconds));
    let _ = writeln!(manifest, "  \"param_count\": {param_count},");
    let _ = writeln!(manifest, "  \"buffer_len\": {},", ck.transitions.len());
    let _ = writeln!(manifest, "  \"words_per_tensor\": {wpt},");
    let _ = writeln!(manifest, "  \"d_max\": {},", ck.d_max);
    let _ = writeln!(manifest, "  \"num_qubits\": {}", ck.num_qubits);
    let _ = writeln!(manifest, "}}");

    let mut params = Vec::with_capacity(4 * param_count * 8);
    push_f64s(&mut params, &ck.online);
    push_f64s(&mut params, &ck.target);
    push_f64s(&mut params, &ck.adam_m);
    push_f64s(&mut params, &ck.adam_v);

    let mut buffer = Vec::new();
    buffer.extend_from_slice(&(ck.transitions.len() as u64).to_le_bytes());
    buffer.extend_from_slice(&(wpt as u64).to_le_bytes());
    for t in &ck.transitions {
        if t.state.words().len() != wpt || t.next_state.words().len() != wpt {
            bail!("transition tensor does not match the checkpoint geometry");
        }
        push_words(&mut buffer, t.state.words());
        push_option_f64(&mut buffer, t.state_energy);
        buffer.extend_from_slice(&(t.action as u64).to_le_bytes());
        buffer.extend_from_slice(&t.reward.to_le_bytes());
        push_words(&mut buffer, t.next_state.words());
        push_option_f64(&mut buffer, t.next_energy);
        buffer.push(t.done as u8);
    }

    write_atomic(&dir.join(PARAMS_FILE), &params)?;
    write_atomic(&dir.join(BUFFER_FILE), &buffer)?;
    // The manifest goes last: its presence marks the checkpoint complete.
    write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<CheckpointState> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))?;
    let v: Value = serde_json::from_str(&text).context("checkpoint manifest is not JSON")?;
    let version = field_u64(&v, "version")?;
    if version != CHECKPOINT_VERSION {
        bail!("unsupported checkpoint version {version}");
    }
    let param_count = field_u64(&v, "param_count")? as usize;
    let buffer_len = field_u64(&v, "buffer_len")? as usize;
    let wpt = field_u64(&v, "words_per_tensor")? as usize;
    let d_max = field_u64(&v, "d_max")? as usize;
    let num_qubits = field_u64(&v, "num_qubits")? as usize;
    if wpt != words_per_tensor(d_max, num_qubits) {
        bail!("checkpoint word count does not match its tensor geometry");
    }

    let params = fs::read(dir.join(PARAMS_FILE)).context("reading checkpoint parameters")?;
    if params.len() != 4 * param_count * 8 {
        bail!("parameter file length does not match the manifest");
    }
    let mut off = 0usize;
    let read_block = |off: &mut usize| -> Result<Vec<f64>> {
        (0..param_count).map(|_| take_f64(&params, off)).collect()
    };
    let online = read_block(&mut off)?;
    let target = read_block(&mut off)?;
    let adam_m = read_block(&mut off)?;
    let adam_v = read_block(&mut off)?;

    let buffer = fs::read(dir.join(BUFFER_FILE)).context("reading checkpoint buffer")?;
    let mut off = 0usize;
    let count = take_u64(&buffer, &mut off)? as usize;
    let stored_wpt = take_u64(&buffer, &mut off)? as usize;
    if count != buffer_len || stored_wpt != wpt {
        bail!("buffer header does not match the manifest");
    }
    let take_tensor = |off: &mut usize| -> Result<CircuitTensor> {
        let words =
            (0..wpt).map(|_| take_u64(&buffer, off)).collect::<Result<Vec<u64>>>()?;
        Ok(CircuitTensor::from_words(d_max, num_qubits, words)?)
    };
    let mut transitions = Vec::with_capacity(count);
    for _ in 0..count {
        let state = take_tensor(&mut off)?;
        let state_energy = take_option_f64(&buffer, &mut off)?;
        let action = take_u64(&buffer, &mut off)? as usize;
        let reward = take_f64(&buffer, &mut off)?;
        let next_state = take_tensor(&mut off)?;
        let next_energy = take_option_f64(&buffer, &mut off)?;
        let done = take_u8(&buffer, &mut off)? != 0;
        transitions.push(Transition {
            state,
            state_energy,
            action,
            reward,
            next_state,
            next_energy,
            done,
        });
    }
    if off != buffer.len() {
        bail!("trailing bytes after the last transition");
    }

    Ok(CheckpointState {
        episodes_started: field_u64(&v, "episodes_started")?,
        env_theta_rng_position: field_u64(&v, "env_theta_rng_position")?,
        env_steps: field_u64(&v, "env_steps")?,
        train_steps: field_u64(&v, "train_steps")?,
        exploration_rng_position: field_u64(&v, "exploration_rng_position")?,
        replay_rng_position: field_u64(&v, "replay_rng_position")?,
        replay_cursor: field_u64(&v, "replay_cursor")? as usize,
        adam_step: field_u64(&v, "adam_step")?,
        elapsed_seconds: field_f64(&v, "elapsed_seconds")?,
        d_max,
        num_qubits,
        online,
        target,
        adam_m,
        adam_v,
        transitions,
    })
}

/// True when `dir` holds a complete checkpoint.
pub fn checkpoint_exists(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file()
        && dir.join(PARAMS_FILE).is_file()
        && dir.join(BUFFER_FILE).is_file()
}

#[cfg(test)]
mod tests {
    use super::*;
    use sykrl_core::codec::encode;

    #[test]
    fn f17_round_trips_awkward_values() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            core::f64::consts::PI,
            -2.342e-4,
            6.0f64 / 512.0,
            1e-300,
            -1.7976931348623157e308,
        ] {
            let back: f64 = f17(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x}");
        }
    }

    #[test]
    fn json_num_turns_non_finite_into_null() {
        assert_eq!(json_num(f64::NAN), "null");
        assert_eq!(json_num(f64::INFINITY), "null");
        assert_eq!(json_num(1.5), f17(1.5));
    }

    #[test]
    fn instance_round_trip_is_identical() {
        let inst = SykInstance::generate(8, 7).unwrap();
        let text = write_instance(&inst);
        let back = parse_instance(&text).unwrap();
        assert_eq!(back.majorana_count(), 8);
        assert_eq!(back.seed(), 7);
        assert_eq!(back.couplings().len(), 70);
        for (a, b) in inst.couplings().iter().zip(back.couplings()) {
            assert_eq!(a.indices, b.indices);
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
        assert_eq!(text, write_instance(&back));
    }

    #[test]
    fn instance_rejects_shuffled_couplings() {
        let inst = SykInstance::generate(8, 0).unwrap();
        let mut text = write_instance(&inst);
        text = text.replacen("[1, 2, 3, 4,", "[1, 2, 3, 5,", 1);
        assert!(parse_instance(&text).is_err());
    }

    #[test]
    fn coupling_map_round_trip() {
        let map = CouplingMap::eagle_r3_t4();
        let text = write_coupling_map(&map);
        let back = parse_coupling_map(&text).unwrap();
        assert_eq!(back.name(), map.name());
        assert_eq!(back.num_qubits(), map.num_qubits());
        assert_eq!(back.pairs(), map.pairs());
    }

    #[test]
    fn circuit_round_trip_preserves_angles_exactly() {
        let gates = vec![
            GateOp::rx(0, core::f64::consts::PI),
            GateOp::cnot(1, 3),
            GateOp::ry(2, -0.1),
            GateOp::rz(3, 1.0 / 3.0),
        ];
        let c = ExpectationCircuit::from_gates(4, gates).unwrap();
        let text = write_circuit(&c);
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back.num_qubits(), 4);
        assert_eq!(back.gates(), c.gates());
        assert_eq!(write_circuit(&back), text);
    }

    #[test]
    fn circuit_parse_tolerates_comments_and_case() {
        let text = "# a comment\n\n# qubits 5\nrx 1 2.5e-1\nCnOt 0 4\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.num_qubits(), 5);
        assert_eq!(c.gates(), &[GateOp::rx(1, 0.25), GateOp::cnot(0, 4)]);
    }

    #[test]
    fn circuit_parse_infers_width_without_header() {
        let c = parse_circuit("RX 2 0e0\n").unwrap();
        assert_eq!(c.num_qubits(), 3);
    }

    #[test]
    fn step_line_has_exactly_the_published_keys() {
        let r = StepRecord {
            episode: 3,
            step: 2,
            action: 7,
            energy: -0.25,
            entropy: 1.5,
            free_energy: -1.0,
            fidelity: f64::NAN,
            reward: 0.56,
            done: false,
            cnot_count: 1,
            gate_count: 4,
            epsilon: 0.9,
            loss: None,
        };
        let line = step_jsonl(&r);
        let v: Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        let mut expected = STEP_KEYS;
        keys.sort_unstable();
        expected.sort_unstable();
        assert_eq!(keys, expected);
        let positions: Vec<usize> =
            STEP_KEYS.iter().map(|k| line.find(&format!("\"{k}\":")).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "keys out of order in {line}");
        assert!(v["Fid"].is_null());
        assert_eq!(v["F"].as_f64().unwrap(), -1.0);
        assert_eq!(v["done"].as_bool().unwrap(), false);
    }

    #[test]
    fn candidate_line_round_trip() {
        let c = CandidateLine {
            episode: 12,
            free_energy: -1.25,
            energy: -0.5,
            entropy: 1.5,
            fidelity: 0.93,
            free_energy_error: 2.5e-3,
            energy_error: 1e-3,
            entropy_error: 2e-3,
            cnot_count: 3,
            gate_count: 9,
            success: true,
            theta: vec![0.25, -1.0 / 7.0],
            circuit_file: String::from("circuits/episode_000012.txt"),
        };
        let back = parse_candidate_line(&candidate_jsonl(&c)).unwrap();
        assert_eq!(back.episode, c.episode);
        assert_eq!(back.theta[1].to_bits(), c.theta[1].to_bits());
        assert_eq!(back.circuit_file, c.circuit_file);
        assert_eq!(back.to_record().cnot_count, 3);
    }

    #[test]
    fn grid_shows_occupied_cells() {
        let c = ExpectationCircuit::from_gates(
            2,
            vec![GateOp::rx(0, 0.0), GateOp::cnot(0, 1)],
        )
        .unwrap();
        let t = encode(&c, 4).unwrap();
        let grid = tensor_grid(&t);
        assert!(grid.contains("moment 0"));
        assert!(grid.contains("RX #."));
        assert!(grid.contains("C0 .#"));
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let t0 = CircuitTensor::empty(4, 2).unwrap();
        let mut t1 = t0.clone();
        t1.set(0, 2, 1, true);
        let ck = CheckpointState {
            episodes_started: 5,
            env_theta_rng_position: 30,
            env_steps: 17,
            train_steps: 11,
            exploration_rng_position: 40,
            replay_rng_position: 22,
            replay_cursor: 1,
            adam_step: 11,
            elapsed_seconds: 1.5,
            d_max: 4,
            num_qubits: 2,
            online: vec![0.1, -0.2, 0.3],
            target: vec![0.1, -0.2, 0.25],
            adam_m: vec![0.0, 1e-9, -2.0],
            adam_v: vec![0.5, 0.25, 0.125],
            transitions: vec![Transition {
                state: t0.clone(),
                state_energy: Some(-0.75),
                action: 3,
                reward: -5.0,
                next_state: t1.clone(),
                next_energy: None,
                done: true,
            }],
        };
        save_checkpoint(dir.path(), &ck).unwrap();
        assert!(checkpoint_exists(dir.path()));
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.episodes_started, 5);
        assert_eq!(back.replay_cursor, 1);
        assert_eq!(back.online, ck.online);
        assert_eq!(back.adam_v, ck.adam_v);
        assert_eq!(back.transitions.len(), 1);
        let tr = &back.transitions[0];
        assert_eq!(tr.state.words(), t0.words());
        assert_eq!(tr.next_state.words(), t1.words());
        assert_eq!(tr.state_energy, Some(-0.75));
        assert_eq!(tr.next_energy, None);
        assert!(tr.done);
        assert_eq!(tr.action, 3);
    }

    #[test]
    fn truncation_drops_lines_past_the_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.jsonl");
        fs::write(
            &path,
            "{\"episode\":1,\"x\":1}\n{\"episode\":2,\"x\":2}\n{\"episode\":3,\"x\":3}\n",
        )
        .unwrap();
        truncate_jsonl(&path, 2).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"episode\":2"));
        assert!(!text.contains("\"episode\":3"));
    }
}
