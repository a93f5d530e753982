//! `assignment`: physical-qubit tables for a `d`-dimensional lattice,
//! their invariants, and for `d = 1` an exported gate schedule.
//!
//! Config keys (all optional):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `d` | 1 | lattice dimension (1 or 2) |
//! | `depth` | 2 | circuit depth `D` |
//! | `ell0` | 3 | radius; `2 ell0 + 1` physical qubits per axis |
//! | `layers` | 5 | table layers checked |
//! | `n_scales` | 2 | scales of the scheduled circuit (`d = 1`) |
//! | `top_width` | `2 ell0 + 1` | top sites of the scheduled circuit |
//! | `target` | two central sites | bottom sites of the schedule |
//! | `verify` | none | path of an existing schedule file to verify instead |
//!
//! Sub-stream: `assignment/circuit` seeds the Haar gates of the schedule.

use std::path::PathBuf;

use dmera::assignment::{
    assign_layer, parse_schedule, plan_schedule, verify_collision_theorem, verify_counting, verify_schedule_lines,
    verify_shift_invariance,
};
use dmera::circuit::{DmeraCircuit, DmeraSpec};
use dmera::engine::{run_exact, trace_distance, Channels, NoiseModel, Program};
use serde::{Deserialize, Serialize};

use crate::config::{load, substream, CliError};
use crate::output::{meta, OutDir};
use crate::Common;

/// Largest lattice on which the schedule is also checked against the
/// full-circuit state.
const STATE_CHECK_SITES: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignmentConfig {
    pub d: usize,
    pub depth: usize,
    pub ell0: usize,
    pub layers: usize,
    pub n_scales: usize,
    pub top_width: Option<usize>,
    pub target: Option<Vec<usize>>,
    pub verify: Option<PathBuf>,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        AssignmentConfig {
            d: 1,
            depth: 2,
            ell0: 3,
            layers: 5,
            n_scales: 2,
            top_width: None,
            target: None,
            verify: None,
        }
    }
}

#[derive(Serialize)]
struct TableCheck {
    layer: usize,
    extent: usize,
    shift_invariance: bool,
    counting: bool,
    collision_theorem: bool,
}

#[derive(Serialize)]
struct ScheduleCheck {
    file: String,
    n_instructions: usize,
    target: Vec<usize>,
    target_ids: Vec<usize>,
    /// First violated invariant of the exported file, if any.
    violation: Option<String>,
    /// Trace distance to the full-circuit state, on small lattices.
    state_deviation: Option<f64>,
}

#[derive(Serialize)]
struct Report<M: Serialize> {
    meta: M,
    n_physical: usize,
    tables: Vec<TableCheck>,
    schedule: Option<ScheduleCheck>,
    passed: bool,
}

pub fn run(common: &Common) -> Result<(), CliError> {
    let exp = load::<AssignmentConfig>("assignment", common)?;
    let cfg = &exp.config;
    if !(1..=2).contains(&cfg.d) {
        return Err(CliError::config(format!("d must be 1 or 2, got {}", cfg.d)));
    }
    if cfg.depth == 0 || cfg.layers == 0 {
        return Err(CliError::config("depth and layers must be positive"));
    }
    if cfg.ell0 + 1 < 2 * cfg.depth {
        return Err(CliError::config(format!(
            "ell0 = {} is below 2D - 1 = {}: with fewer than 2(2D - 1) + 1 physical qubits per axis the \
             past causal cone of a depth-{} circuit can hold two live qubits with the same id",
            cfg.ell0,
            2 * cfg.depth - 1,
            cfg.depth
        )));
    }
    let n_physical = (2 * cfg.ell0 + 1).pow(cfg.d as u32);
    if let Some(path) = &cfg.verify {
        return verify_file(path, n_physical);
    }
    let out = OutDir::create(&common.out_dir)?;
    let meta = meta(&out, &exp, common.workers)?;

    let mut tables = Vec::with_capacity(cfg.layers);
    for layer in 1..=cfg.layers {
        let t = assign_layer(layer, cfg.ell0, cfg.d)?;
        tables.push(TableCheck {
            layer,
            extent: t.extent,
            shift_invariance: verify_shift_invariance(&t),
            counting: verify_counting(&t),
            collision_theorem: verify_collision_theorem(&t),
        });
    }
    let mut passed = tables.iter().all(|t| t.shift_invariance && t.counting && t.collision_theorem);
    for t in &tables {
        println!(
            "layer {}: shift invariance {}, counting {}, collision theorem {}",
            t.layer,
            verdict(t.shift_invariance),
            verdict(t.counting),
            verdict(t.collision_theorem)
        );
    }

    let schedule = if cfg.d == 1 {
        let top = cfg.top_width.unwrap_or(2 * cfg.ell0 + 1);
        let spec = DmeraSpec::new(cfg.n_scales, cfg.depth).with_top_width(top);
        spec.validate()?;
        let w = spec.n_sites();
        let target = match &cfg.target {
            Some(t) => t.clone(),
            None => vec![w / 2, (w / 2 + 1) % w],
        };
        let c = DmeraCircuit::random(spec, substream(exp.seed, "assignment/circuit", &[]))?;
        let s = plan_schedule(&c, &target, cfg.ell0)?;
        let text = s.to_text();
        out.write("schedule.txt", &text)?;
        out.write_json("schedule.json", &s)?;
        let violation = verify_schedule_lines(&parse_schedule(&text)?, n_physical).err();
        let state_deviation = if w <= STATE_CHECK_SITES {
            let ch = Channels::<f64>::from_circuit(&c);
            let a = run_exact(&s.to_program(), &ch, &NoiseModel::ideal())?;
            let mut sorted = target.clone();
            sorted.sort_unstable();
            let g = run_exact(&Program::global(&c, &sorted)?, &ch, &NoiseModel::ideal())?;
            Some(trace_distance(&a, &g)?)
        } else {
            None
        };
        passed &= violation.is_none() && state_deviation.is_none_or(|d| d < 1e-10);
        println!(
            "schedule: {} instructions on {n_physical} qubits, {}",
            s.instructions.len(),
            violation.as_deref().unwrap_or("all invariants hold")
        );
        Some(ScheduleCheck {
            file: "schedule.txt".into(),
            n_instructions: s.instructions.len(),
            target: s.target.clone(),
            target_ids: s.target_ids.clone(),
            violation,
            state_deviation,
        })
    } else {
        None
    };
    out.write_json(
        "assignment_report.json",
        &Report {
            meta,
            n_physical,
            tables,
            schedule,
            passed,
        },
    )?;
    if passed {
        Ok(())
    } else {
        Err(CliError::verify("verification failed; see assignment_report.json"))
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "VIOLATED"
    }
}

fn verify_file(path: &PathBuf, n_physical: usize) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let lines = parse_schedule(&text).map_err(|e| CliError::verify(format!("{}: {e}", path.display())))?;
    match verify_schedule_lines(&lines, n_physical) {
        Ok(()) => {
            println!("{}: {} instructions, all invariants hold", path.display(), lines.len());
            Ok(())
        }
        Err(v) => Err(CliError::verify(format!("{}: {v}", path.display()))),
    }
}
