//! `optimize`: sweep optimization of a TFIM circuit, or the SPSA benchmark
//! on random quadratic objectives.
//!
//! Config keys (all optional):
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `model` | `"tfim"` | `tfim` or `quadratic-bench` |
//! | `n_sweeps` | 2 | sweeps over all parameter sets (tfim) |
//! | `[spsa]` | `a = 0.05, b = 0.01, A = 10, s_exp = 1, t_exp = 1/6` | gains; `max_iters` 100 per gate (tfim) and 2000 per run (quadratic-bench) when absent |
//! | `[tfim]` | `length = 8, g = 1, periodic = true, depth = 2, top_width = 1, sharing = true, init = "gaussian", sigma = 0.1` | model and circuit |
//! | `[estimator]` | `kind = "exact"` | `exact`, `shots` (`n_shots`), `trajectory` (`n_trajectories`, `batches`) |
//! | `[noise]` | `p_gate = 1e-3` | `p_gate`, `p_prep`, `p_meas` |
//! | `[quadratic]` | `dim = 4, n_terms = 5, noise_fraction = 0.01, runs = 100, restarts = 50, tolerance = 0.02` | benchmark |
//!
//! The lattice length must equal `top_width * 2^n` for some `n >= 1`; the
//! circuit then has `n` scales.
//!
//! Sub-streams: `optimize/init`, `optimize/spsa`, `optimize/estimator` for
//! tfim; `optimize/objective[run]`, `optimize/start[run]`,
//! `optimize/noise[run]`, `optimize/spsa[run]`, `optimize/reference[run]`
//! for the benchmark.

use dmera::circuit::{DmeraCircuit, DmeraSpec};
use dmera::engine::NoiseModel;
use dmera::linalg::{expi_hermitian, haar_su};
use dmera::models::{exact_ground_energy, tfim, ED_LIMIT};
use dmera::optimizer::{
    circuit_energy, evaluate_quadratic, run_spsa, sweep_optimize, EngineConfig, Estimator, QuadraticObjective,
    SpsaConfig, SweepConfig,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load, substream, CliError, InitKind, NoiseSection};
use crate::output::{meta, num, Csv, OutDir};
use crate::Common;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Tfim,
    QuadraticBench,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpsaSection {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub s_exp: f64,
    pub t_exp: f64,
    pub max_iters: Option<usize>,
}

impl Default for SpsaSection {
    fn default() -> Self {
        let d = SpsaConfig::default();
        SpsaSection {
            a: d.a,
            b: d.b,
            big_a: d.big_a,
            s_exp: d.s_exp,
            t_exp: d.t_exp,
            max_iters: None,
        }
    }
}

impl SpsaSection {
    fn config(&self, default_iters: usize, seed: u64) -> Result<SpsaConfig, CliError> {
        let c = SpsaConfig {
            a: self.a,
            b: self.b,
            big_a: self.big_a,
            s_exp: self.s_exp,
            t_exp: self.t_exp,
            max_iters: self.max_iters.unwrap_or(default_iters),
            seed,
        };
        c.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TfimSection {
    pub length: usize,
    pub g: f64,
    pub periodic: bool,
    pub depth: usize,
    pub top_width: usize,
    pub sharing: bool,
    pub init: InitKind,
    pub sigma: f64,
}

impl Default for TfimSection {
    fn default() -> Self {
        TfimSection {
            length: 8,
            g: 1.0,
            periodic: true,
            depth: 2,
            top_width: 1,
            sharing: true,
            init: InitKind::Gaussian,
            sigma: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub kind: String,
    pub n_shots: u64,
    pub n_trajectories: usize,
    pub batches: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            kind: "exact".into(),
            n_shots: 1000,
            n_trajectories: 400,
            batches: 8,
        }
    }
}

impl EstimatorSection {
    fn estimator(&self, seed: u64) -> Result<Estimator, CliError> {
        match self.kind.as_str() {
            "exact" => Ok(Estimator::Exact),
            "shots" if self.n_shots > 0 => Ok(Estimator::Shots {
                n_shots: self.n_shots,
                seed,
            }),
            "trajectory" if self.n_trajectories > 0 && self.batches > 1 => Ok(Estimator::Trajectory {
                n_trajectories: self.n_trajectories,
                batches: self.batches,
                seed,
            }),
            "shots" | "trajectory" => Err(CliError::config(
                "shots need n_shots >= 1; trajectories need n_trajectories >= 1 and batches >= 2",
            )),
            other => Err(CliError::config(format!(
                "unknown estimator kind {other:?}; use exact, shots or trajectory"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticSection {
    pub dim: usize,
    pub n_terms: usize,
    pub noise_fraction: f64,
    pub runs: usize,
    /// Random starts of the reference minimizer.
    pub restarts: usize,
    /// Relative gap to the reference minimum counted as success.
    pub tolerance: f64,
}

impl Default for QuadraticSection {
    fn default() -> Self {
        QuadraticSection {
            dim: 4,
            n_terms: 5,
            noise_fraction: 0.01,
            runs: 100,
            restarts: 50,
            tolerance: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub model: Model,
    pub n_sweeps: usize,
    pub spsa: SpsaSection,
    pub tfim: TfimSection,
    pub estimator: EstimatorSection,
    pub noise: NoiseSection,
    pub quadratic: QuadraticSection,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            model: Model::Tfim,
            n_sweeps: 2,
            spsa: SpsaSection::default(),
            tfim: TfimSection::default(),
            estimator: EstimatorSection::default(),
            noise: NoiseSection::default(),
            quadratic: QuadraticSection::default(),
        }
    }
}

pub fn run(common: &Common) -> Result<(), CliError> {
    let exp = load::<OptimizeConfig>("optimize", common)?;
    match exp.config.model {
        Model::Tfim => run_tfim(common, &exp),
        Model::QuadraticBench => run_quadratic(common, &exp),
    }
}

/// Number of scales `n` with `length = top_width * 2^n`.
pub fn scales_for(length: usize, top_width: usize) -> Result<usize, CliError> {
    if top_width == 0 || length % top_width != 0 || !(length / top_width).is_power_of_two() || length <= top_width {
        return Err(CliError::config(format!(
            "lattice mismatch: length {length} is not top_width {top_width} times a power of two (at least 2)"
        )));
    }
    Ok((length / top_width).trailing_zeros() as usize)
}

#[derive(Serialize)]
struct TfimReport<M: Serialize> {
    meta: M,
    n_sites: usize,
    n_scales: usize,
    n_param_sets: usize,
    initial_energy_per_site: f64,
    initial_stderr_per_site: f64,
    final_energy_per_site: f64,
    final_stderr_per_site: f64,
    sweep_energies_per_site: Vec<f64>,
    product_state_energy_per_site: f64,
    exact_energy_per_site: Option<f64>,
    /// `final - exact`, per site.
    gap_to_exact: Option<f64>,
    circuit_file: &'static str,
    trace_file: &'static str,
}

fn run_tfim(common: &Common, exp: &crate::config::Experiment<OptimizeConfig>) -> Result<(), CliError> {
    let cfg = &exp.config;
    let t = &cfg.tfim;
    let n_scales = scales_for(t.length, t.top_width)?;
    let h = tfim(t.length, t.g, t.periodic)?;
    let spec = DmeraSpec::new(n_scales, t.depth).with_top_width(t.top_width);
    let circuit = DmeraCircuit::build(spec.clone(), t.sharing, t.init.init(substream(exp.seed, "optimize/init", &[]), t.sigma))?;
    let engine = EngineConfig {
        noise: cfg.noise.model()?,
        estimator: cfg.estimator.estimator(substream(exp.seed, "optimize/estimator", &[]))?,
    };
    let sweep = SweepConfig {
        spsa: cfg.spsa.config(100, substream(exp.seed, "optimize/spsa", &[]))?,
        n_sweeps: cfg.n_sweeps,
    };
    // Surface infeasible cones before any optimization.
    circuit_energy(&circuit, &h, &engine)?;
    let out = OutDir::create(&common.out_dir)?;
    let meta = meta(&out, exp, common.workers)?;

    let r = sweep_optimize(&circuit, &h, &engine, &sweep)?;
    let l = t.length as f64;
    let product = circuit_energy(&DmeraCircuit::identity(spec)?, &h, &EngineConfig::exact(NoiseModel::ideal()))?;
    let exact = if t.length <= ED_LIMIT {
        Some(exact_ground_energy(&h)? / l)
    } else {
        None
    };
    let mut csv = Csv::new(&["iteration", "energy", "energy_stderr", "gate_index", "sweep"]);
    for rec in &r.trace {
        csv.row(&[
            rec.iteration.to_string(),
            num(rec.energy),
            num(rec.energy_stderr),
            rec.gate_index.to_string(),
            rec.sweep.to_string(),
        ]);
    }
    out.write("trace.csv", &csv.finish())?;
    out.write("circuit.json", &r.circuit.to_json()?)?;
    let report = TfimReport {
        meta,
        n_sites: t.length,
        n_scales,
        n_param_sets: r.circuit.param_sets().len(),
        initial_energy_per_site: r.initial.mean / l,
        initial_stderr_per_site: r.initial.stderr / l,
        final_energy_per_site: r.final_energy.mean / l,
        final_stderr_per_site: r.final_energy.stderr / l,
        sweep_energies_per_site: r.sweep_energies.iter().map(|e| e.mean / l).collect(),
        product_state_energy_per_site: product.mean / l,
        exact_energy_per_site: exact,
        gap_to_exact: exact.map(|e| r.final_energy.mean / l - e),
        circuit_file: "circuit.json",
        trace_file: "trace.csv",
    };
    println!(
        "final energy per site {:.8} +- {:.2e}{}",
        report.final_energy_per_site,
        report.final_stderr_per_site,
        match exact {
            Some(e) => format!(" (exact {e:.8}, gap {:.3e})", report.final_energy_per_site - e),
            None => String::new(),
        }
    );
    out.write_json("optimize.json", &report)?;
    Ok(())
}

/// Lowest value of `obj` found by steepest descent on the unitary group
/// from `restarts` Haar-random starts.
///
/// The derivative of `E(exp(A) U)` along anti-Hermitian `A` is
/// `Tr(A [U h U^dag, rho])` summed over terms, so each step multiplies by
/// `exp(eta C)` with `C` that commutator sum; `eta` adapts by backtracking.
pub fn reference_minimum<R: Rng + ?Sized>(obj: &QuadraticObjective, restarts: usize, rng: &mut R) -> f64 {
    let n = obj.dim;
    let mut best = f64::INFINITY;
    for _ in 0..restarts {
        let mut u = haar_su(n, rng);
        let mut e = obj.exact(&u);
        let mut eta = 0.5;
        for _ in 0..3000 {
            let mut c = DMatrix::<Complex64>::zeros(n, n);
            for (rho, h) in &obj.terms {
                let k = &u * h * u.adjoint();
                c += &k * rho - rho * &k;
            }
            if c.norm() < 1e-12 {
                break;
            }
            // exp(eta C) = exp(i H) with the Hermitian H = -i eta C.
            let step = expi_hermitian(&(&c * Complex64::new(0.0, -eta)));
            let cand = &step * &u;
            let ec = obj.exact(&cand);
            if ec < e {
                u = cand;
                e = ec;
                eta *= 1.2;
            } else {
                eta *= 0.5;
                if eta < 1e-12 {
                    break;
                }
            }
        }
        best = best.min(e);
    }
    best
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    final_energy: f64,
    best_energy: f64,
    reference_minimum: f64,
    relative_gap: f64,
    within_tolerance: bool,
    best_params: Vec<f64>,
}

#[derive(Serialize)]
struct QuadraticReport<M: Serialize> {
    meta: M,
    runs: usize,
    within_tolerance: usize,
    burn_in: usize,
    /// The run-averaged exact energy never rises after the burn-in.
    monotone_after_burn_in: bool,
    trace_file: &'static str,
    summaries: Vec<RunSummary>,
}

fn run_quadratic(common: &Common, exp: &crate::config::Experiment<OptimizeConfig>) -> Result<(), CliError> {
    let cfg = &exp.config;
    let q = &cfg.quadratic;
    if q.runs == 0 || q.restarts == 0 || q.dim < 2 || q.n_terms == 0 {
        return Err(CliError::config("quadratic-bench needs runs, restarts, n_terms >= 1 and dim >= 2"));
    }
    let spsa0 = cfg.spsa.config(2000, 0)?;
    let out = OutDir::create(&common.out_dir)?;
    let meta = meta(&out, exp, common.workers)?;
    let iters = spsa0.max_iters;
    let results = (0..q.runs)
        .into_par_iter()
        .map(|r| -> Result<(RunSummary, Vec<f64>), CliError> {
            let key = [r as u64];
            let mut orng = ChaCha8Rng::seed_from_u64(substream(exp.seed, "optimize/objective", &key));
            let obj = QuadraticObjective::random(q.dim, q.n_terms, q.noise_fraction, &mut orng)
                .map_err(|e| CliError::config(e.to_string()))?;
            let mut srng = ChaCha8Rng::seed_from_u64(substream(exp.seed, "optimize/start", &key));
            let x0: Vec<f64> = (0..obj.n_params()).map(|_| srng.random_range(-1.0..1.0)).collect();
            let mut nrng = ChaCha8Rng::seed_from_u64(substream(exp.seed, "optimize/noise", &key));
            let mut f = |x: &[f64]| evaluate_quadratic(&obj, &obj.unitary(x)?, &mut nrng);
            let spsa = SpsaConfig {
                seed: substream(exp.seed, "optimize/spsa", &key),
                ..spsa0.clone()
            };
            let run = run_spsa(&spsa, &mut f, &x0)?;
            let exact_at = |x: &[f64]| -> Result<f64, CliError> { Ok(obj.exact(&obj.unitary(x)?)) };
            let trace = run.trace.iter().map(|t| exact_at(&t.params)).collect::<Result<Vec<_>, _>>()?;
            let mut rrng = ChaCha8Rng::seed_from_u64(substream(exp.seed, "optimize/reference", &key));
            let reference = reference_minimum(&obj, q.restarts, &mut rrng);
            let final_energy = exact_at(&run.final_params)?;
            let gap = (final_energy - reference).abs() / reference.abs().max(1e-300);
            Ok((
                RunSummary {
                    run: r,
                    final_energy,
                    best_energy: exact_at(&run.best_params)?,
                    reference_minimum: reference,
                    relative_gap: gap,
                    within_tolerance: gap <= q.tolerance,
                    best_params: run.best_params,
                },
                trace,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = q.runs as f64;
    let mut csv = Csv::new(&["iteration", "energy", "energy_stderr", "gate_index", "sweep"]);
    let mut avg = Vec::with_capacity(iters);
    for k in 0..iters {
        let v: Vec<f64> = results.iter().map(|(_, t)| t[k]).collect();
        let m = v.iter().sum::<f64>() / n;
        let se = if q.runs > 1 {
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        avg.push(m);
        csv.row(&[k.to_string(), num(m), num(se), "0".into(), "0".into()]);
    }
    out.write("trace.csv", &csv.finish())?;
    let burn_in = iters / 10;
    let monotone = avg.get(burn_in..).unwrap_or(&[]).windows(2).all(|w| w[1] <= w[0]);
    let summaries: Vec<RunSummary> = results.into_iter().map(|(s, _)| s).collect();
    let within = summaries.iter().filter(|s| s.within_tolerance).count();
    println!(
        "{within}/{} runs within {:.1}% of the reference minimum; averaged trace {} after {burn_in} iterations",
        q.runs,
        100.0 * q.tolerance,
        if monotone { "monotone" } else { "not monotone" }
    );
    let report = QuadraticReport {
        meta,
        runs: q.runs,
        within_tolerance: within,
        burn_in,
        monotone_after_burn_in: monotone,
        trace_file: "trace.csv",
        summaries,
    };
    out.write_json("optimize.json", &report)?;
    Ok(())
}
