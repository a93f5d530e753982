//! `noise-table`: trace distance between the ideal and noisy states of a
//! target pair for random circuits of several depths.
//!
//! Config keys (all optional):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `n_scales` | 9 | scales of the circuit |
//! | `top_width` | 1 | sites at the top scale |
//! | `depths` | `[2, 3, 4, 5]` | circuit depths, each in 2..=5 |
//! | `samples` | 100 | random circuits per depth |
//! | `target` | two sites left of the centre | bottom sites compared |
//! | `engine` | `"auto"` | `auto` (exact up to depth 3), `exact`, `trajectory` |
//! | `n_trajectories` | 2000 | trajectories per circuit for the trajectory engine |
//! | `[noise]` | `p_gate = 1e-3` | `p_gate`, `p_prep`, `p_meas` |
//!
//! Sub-streams: `noise-table/circuit[depth, sample]` seeds the Haar gates,
//! `noise-table/trajectory[depth, sample]` the trajectory sampler.

use std::time::Instant;

use dmera::circuit::{DmeraCircuit, DmeraSpec};
use dmera::engine::{compare_noisy, EngineChoice, ResultRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load, substream, CliError, NoiseSection};
use crate::output::{meta, num, Csv, OutDir};
use crate::Common;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineSelect {
    Auto,
    Exact,
    Trajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseTableConfig {
    pub n_scales: usize,
    pub top_width: usize,
    pub depths: Vec<usize>,
    pub samples: usize,
    pub target: Option<Vec<usize>>,
    pub engine: EngineSelect,
    pub n_trajectories: usize,
    pub noise: NoiseSection,
}

impl Default for NoiseTableConfig {
    fn default() -> Self {
        NoiseTableConfig {
            n_scales: 9,
            top_width: 1,
            depths: vec![2, 3, 4, 5],
            samples: 100,
            target: None,
            engine: EngineSelect::Auto,
            n_trajectories: 2000,
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Serialize)]
struct Row {
    depth: usize,
    p: f64,
    engine: String,
    samples: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
    /// Noisy locations in the causal cone.
    noise_locations: usize,
    /// Expected faulty locations per run.
    expected_errors: f64,
    /// Errors inserted over all trajectories of all samples.
    errors_inserted: u64,
}

#[derive(Serialize)]
struct Sample {
    depth: usize,
    sample: usize,
    peak_live: usize,
    record: ResultRecord,
}

#[derive(Serialize)]
struct Document<'a, M: Serialize> {
    meta: M,
    target: &'a [usize],
    rows: Vec<Row>,
    samples: Vec<Sample>,
}

pub fn run(common: &Common) -> Result<(), CliError> {
    let exp = load::<NoiseTableConfig>("noise-table", common)?;
    let cfg = &exp.config;
    let noise = cfg.noise.model()?;
    if cfg.depths.is_empty() || cfg.depths.iter().any(|d| !(2..=5).contains(d)) {
        return Err(CliError::config(format!("depths must lie in 2..=5, got {:?}", cfg.depths)));
    }
    if cfg.samples == 0 {
        return Err(CliError::config("samples must be positive"));
    }
    if cfg.engine != EngineSelect::Exact && cfg.n_trajectories == 0 {
        return Err(CliError::config("n_trajectories must be positive"));
    }
    let base = DmeraSpec::new(cfg.n_scales, 2).with_top_width(cfg.top_width);
    base.validate()?;
    let w = base.n_sites();
    let target = match &cfg.target {
        Some(t) => t.clone(),
        None if w >= 4 => vec![w / 2 - 2, w / 2 - 1],
        None => vec![0],
    };
    if let Some(&x) = target.iter().find(|&&x| x >= w) {
        return Err(CliError::config(format!("target site {x} is outside a lattice of {w} sites")));
    }
    let out = OutDir::create(&common.out_dir)?;
    let meta = meta(&out, &exp, common.workers)?;

    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut csv = Csv::new(&[
        "D", "p", "engine", "samples", "mean", "std", "min", "max", "noise_locations", "expected_errors",
        "errors_inserted",
    ]);
    for &depth in &cfg.depths {
        let trajectory = match cfg.engine {
            EngineSelect::Auto => depth >= 4,
            EngineSelect::Exact => false,
            EngineSelect::Trajectory => true,
        };
        let spec = DmeraSpec::new(cfg.n_scales, depth).with_top_width(cfg.top_width);
        let results = (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let key = [depth as u64, i as u64];
                let c = DmeraCircuit::random(spec.clone(), substream(exp.seed, "noise-table/circuit", &key))?;
                let choice = if trajectory {
                    EngineChoice::Trajectory {
                        n_trajectories: cfg.n_trajectories,
                        seed: substream(exp.seed, "noise-table/trajectory", &key),
                    }
                } else {
                    EngineChoice::Exact
                };
                let t = Instant::now();
                let r = compare_noisy(&c, &target, &noise, &choice)?;
                Ok((r, t.elapsed().as_secs_f64()))
            })
            .collect::<Result<Vec<_>, dmera::Error>>()?;
        let td: Vec<f64> = results.iter().map(|(r, _)| r.trace_distance).collect();
        let n = td.len() as f64;
        let mean = td.iter().sum::<f64>() / n;
        let std = if td.len() > 1 {
            (td.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let first = &results[0].0;
        let row = Row {
            depth,
            p: noise.p_gate,
            engine: first.engine.clone(),
            samples: cfg.samples,
            mean,
            std,
            min: td.iter().copied().fold(f64::INFINITY, f64::min),
            max: td.iter().copied().fold(0.0, f64::max),
            noise_locations: first.noise_locations,
            expected_errors: first.expected_errors,
            errors_inserted: results.iter().map(|(r, _)| r.errors_inserted).sum(),
        };
        println!(
            "D={depth} engine={} mean={:.4e} std={:.2e} locations={} expected_errors={:.4}",
            row.engine, row.mean, row.std, row.noise_locations, row.expected_errors
        );
        csv.row(&[
            depth.to_string(),
            num(row.p),
            row.engine.clone(),
            row.samples.to_string(),
            num(row.mean),
            num(row.std),
            num(row.min),
            num(row.max),
            row.noise_locations.to_string(),
            num(row.expected_errors),
            row.errors_inserted.to_string(),
        ]);
        for (i, (r, wall)) in results.into_iter().enumerate() {
            samples.push(Sample {
                depth,
                sample: i,
                peak_live: r.peak_live,
                record: ResultRecord {
                    config_hash: meta.config_hash.clone(),
                    engine: r.engine,
                    n_trajectories: r.n_trajectories,
                    error_locations: r.noise_locations,
                    rdm: r.rdm,
                    trace_distance_to_ideal: Some(r.trace_distance),
                    wall_time: wall,
                },
            });
        }
        rows.push(row);
    }
    out.write("noise_table.csv", &csv.finish())?;
    let doc = Document {
        meta,
        target: &target,
        rows,
        samples,
    };
    out.write_json("noise_table.json", &doc)?;
    Ok(())
}
