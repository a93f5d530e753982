//! Simultaneous-perturbation stochastic approximation and the per-gate
//! sweep that drives it through the contraction engines.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::circuit::{CausalCone, DmeraCircuit, GateParams};
use crate::engine::{
    expectation, run_exact, run_trajectories, sample_shots, Channels, NoiseModel, Program,
    TrajectoryConfig,
};
use crate::error::{Error, Result};
use crate::linalg::expi_hermitian;
use crate::models::PauliHamiltonian;
use crate::pauli::PauliString;
use crate::spectral::pauli_of_index;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub s_exp: f64,
    pub t_exp: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig {
            a: 0.05,
            b: 0.01,
            big_a: 10.0,
            s_exp: 1.0,
            t_exp: 1.0 / 6.0,
            max_iters: 2000,
            seed: 0,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0 && self.b > 0.0 && self.big_a >= 0.0;
        let finite = [self.a, self.b, self.big_a, self.s_exp, self.t_exp]
            .iter()
            .all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "SPSA gains need a, b > 0 and A >= 0 (got a={}, b={}, A={})",
                self.a, self.b, self.big_a
            )))
        }
    }
}

/// `(alpha_k, beta_k) = (a / (k + 1 + A)^s, b / (k + 1)^t)`.
pub fn gains(k: usize, cfg: &SpsaConfig) -> (f64, f64) {
    let k = k as f64;
    (
        cfg.a / (k + 1.0 + cfg.big_a).powf(cfg.s_exp),
        cfg.b / (k + 1.0).powf(cfg.t_exp),
    )
}

/// Rademacher direction.
pub fn rademacher<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Result of one step: the new point and the two objective values.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsaStep {
    pub params: Vec<f64>,
    pub e_plus: f64,
    pub e_minus: f64,
}

fn checked(k: usize, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteObjective { iteration: k, value: v })
    }
}

/// One iteration: `g = (E(x + alpha v) - E(x - alpha v)) / (2 alpha)`,
/// `x <- x - beta g v`. Evaluates the objective exactly twice.
pub fn spsa_step<F, R>(k: usize, x: &[f64], cfg: &SpsaConfig, objective: &mut F, rng: &mut R) -> Result<SpsaStep>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let (alpha, beta) = gains(k, cfg);
    let v = rademacher(x.len(), rng);
    let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + alpha * b).collect();
    let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - alpha * b).collect();
    let e_plus = checked(k, objective(&plus)?)?;
    let e_minus = checked(k, objective(&minus)?)?;
    let g = (e_plus - e_minus) / (2.0 * alpha);
    let params = x.iter().zip(&v).map(|(a, b)| a - beta * g * b).collect();
    Ok(SpsaStep {
        params,
        e_plus,
        e_minus,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaRecord {
    pub k: usize,
    /// Mean of the two evaluations around the point entering iteration `k`.
    pub energy: f64,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsaRun {
    pub trace: Vec<SpsaRecord>,
    pub final_params: Vec<f64>,
    /// Point with the lowest recorded energy.
    pub best_params: Vec<f64>,
    pub best_energy: f64,
}

/// `cfg.max_iters` steps from `x0` with a generator seeded by `cfg.seed`.
pub fn run_spsa<F>(cfg: &SpsaConfig, objective: &mut F, x0: &[f64]) -> Result<SpsaRun>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.to_vec();
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut best = (f64::INFINITY, x.clone());
    for k in 0..cfg.max_iters {
        let step = spsa_step(k, &x, cfg, objective, &mut rng)?;
        let energy = 0.5 * (step.e_plus + step.e_minus);
        if energy < best.0 {
            best = (energy, x.clone());
        }
        trace.push(SpsaRecord {
            k,
            energy,
            params: x,
        });
        x = step.params;
    }
    Ok(SpsaRun {
        trace,
        final_params: x,
        best_params: best.1,
        best_energy: best.0,
    })
}

/// `E(U) = sum_i Tr(rho_i U h_i U^dag)` with Gaussian evaluation noise.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    pub dim: usize,
    pub terms: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)>,
    /// Noise standard deviation as a fraction of `max_i ||h_i||`.
    pub noise_fraction: f64,
}

fn operator_norm(h: &DMatrix<Complex64>) -> f64 {
    h.clone()
        .symmetric_eigenvalues()
        .iter()
        .map(|e| e.abs())
        .fold(0.0, f64::max)
}

impl QuadraticObjective {
    pub fn new(terms: Vec<(DMatrix<Complex64>, DMatrix<Complex64>)>, noise_fraction: f64) -> Result<Self> {
        let dim = terms.first().map(|t| t.0.nrows()).ok_or(Error::InvalidSpec("no terms".into()))?;
        if !dim.is_power_of_two() {
            return Err(Error::InvalidSpec(format!("dimension {dim} is not a power of two")));
        }
        for (rho, h) in &terms {
            if rho.shape() != (dim, dim) || h.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(rho.nrows(), dim));
            }
            let herm = (h - h.adjoint()).camax();
            if herm > 1e-12 {
                return Err(Error::NonHermitian(format!("h defect {herm:e}")));
            }
            let rh = (rho - rho.adjoint()).camax();
            let min_eig = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            if rh > 1e-10 || min_eig < -1e-10 {
                return Err(Error::InvalidSpec(format!("rho is not PSD (min eigenvalue {min_eig:e})")));
            }
        }
        if !(noise_fraction >= 0.0 && noise_fraction.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise fraction {noise_fraction}")));
        }
        Ok(QuadraticObjective {
            dim,
            terms,
            noise_fraction,
        })
    }

    /// Random instance: Wishart states of unit trace, GUE terms scaled to
    /// unit operator norm.
    pub fn random<R: Rng + ?Sized>(dim: usize, n_terms: usize, noise_fraction: f64, rng: &mut R) -> Result<Self> {
        let gauss = |rng: &mut R| {
            DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
                Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            })
        };
        let terms = (0..n_terms)
            .map(|_| {
                let g = gauss(rng);
                let rho = &g * g.adjoint();
                let rho = &rho / rho.trace();
                let a = gauss(rng);
                let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
                let h = &h / Complex64::new(operator_norm(&h), 0.0);
                (rho, h)
            })
            .collect();
        Self::new(terms, noise_fraction)
    }

    pub fn n_params(&self) -> usize {
        self.dim * self.dim - 1
    }

    pub fn sigma(&self) -> f64 {
        self.noise_fraction * self.terms.iter().map(|t| operator_norm(&t.1)).fold(0.0, f64::max)
    }

    /// Noiseless value at `u`.
    pub fn exact(&self, u: &DMatrix<Complex64>) -> f64 {
        let ud = u.adjoint();
        self.terms
            .iter()
            .map(|(rho, h)| (rho * u * h * &ud).trace().re)
            .sum()
    }

    /// `U(x) = exp(i sum_k x_k P_k)` over the non-identity Pauli strings.
    pub fn unitary(&self, x: &[f64]) -> Result<DMatrix<Complex64>> {
        params_unitary(self.dim, x)
    }
}

/// `exp(i sum_k x_k P_{k+1})` on `log2(dim)` qubits, Pauli index order as
/// in [`pauli_of_index`].
pub fn params_unitary(dim: usize, x: &[f64]) -> Result<DMatrix<Complex64>> {
    if x.len() + 1 != dim * dim {
        return Err(Error::ParamCount {
            expected: dim * dim - 1,
            got: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFiniteParam { index });
    }
    let n = dim.trailing_zeros() as usize;
    let sites: Vec<usize> = (0..n).collect();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (k, &t) in x.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let m = crate::engine::pauli_matrix(&pauli_of_index(k + 1, &sites), &sites)?;
        for (i, z) in m.iter().enumerate() {
            h[(i / dim, i % dim)] += z * t;
        }
    }
    Ok(expi_hermitian(&h))
}

/// Exact value plus Gaussian noise; rejects non-unitary `u` (tolerance 1e-8).
pub fn evaluate_quadratic<R: Rng + ?Sized>(obj: &QuadraticObjective, u: &DMatrix<Complex64>, rng: &mut R) -> Result<f64> {
    if u.shape() != (obj.dim, obj.dim) {
        return Err(Error::DimensionMismatch(u.nrows(), obj.dim));
    }
    let defect = (u.adjoint() * u - DMatrix::<Complex64>::identity(obj.dim, obj.dim)).camax();
    if defect > 1e-8 {
        return Err(Error::NotUnitary(defect));
    }
    let sigma = obj.sigma();
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?.sample(rng)
    } else {
        0.0
    };
    Ok(obj.exact(u) + noise)
}

/// How energies are measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// Exact expectations of the noisy state.
    Exact,
    /// Finite measurement statistics on top of the exact noisy marginals.
    Shots { n_shots: u64, seed: u64 },
    /// Trajectory-averaged marginals, error bars from independent batches.
    Trajectory { n_trajectories: usize, batches: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub noise: NoiseModel,
    pub estimator: Estimator,
}

impl EngineConfig {
    pub fn exact(noise: NoiseModel) -> Self {
        EngineConfig {
            noise,
            estimator: Estimator::Exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Terms grouped by the smallest already-chosen support containing them.
fn group_terms(h: &PauliHamiltonian) -> Vec<(Vec<usize>, Vec<PauliString>)> {
    let mut order: Vec<&PauliString> = h.terms.iter().collect();
    order.sort_by_key(|t| std::cmp::Reverse(t.weight()));
    let mut groups: Vec<(BTreeSet<usize>, Vec<PauliString>)> = Vec::new();
    let mut constant = Vec::new();
    for t in order {
        if t.is_identity() {
            constant.push(t.clone());
            continue;
        }
        let sup: BTreeSet<usize> = t.support().collect();
        match groups.iter_mut().find(|g| sup.is_subset(&g.0)) {
            Some(g) => g.1.push(t.clone()),
            None => groups.push((sup, vec![t.clone()])),
        }
    }
    let mut out: Vec<(Vec<usize>, Vec<PauliString>)> =
        groups.into_iter().map(|(s, t)| (s.into_iter().collect(), t)).collect();
    if !constant.is_empty() {
        out.push((Vec::new(), constant));
    }
    out
}

/// Energy of the bottom-lattice state of `circuit`, summed over terms.
pub fn circuit_energy(circuit: &DmeraCircuit, h: &PauliHamiltonian, cfg: &EngineConfig) -> Result<EnergyEstimate> {
    let n = circuit.spec().n_sites();
    if h.n_qubits != n {
        return Err(Error::InvalidSpec(format!(
            "Hamiltonian on {} qubits, circuit has {n} sites",
            h.n_qubits
        )));
    }
    cfg.noise.validate()?;
    let channels = Channels::<f64>::from_circuit(circuit);
    let mut mean = 0.0;
    let mut var = 0.0;
    for (gi, (support, terms)) in group_terms(h).into_iter().enumerate() {
        if support.is_empty() {
            mean += terms.iter().map(|t| t.coeff).sum::<f64>();
            continue;
        }
        let cone = CausalCone::new(circuit, &support)?;
        let program = Program::from_cone(circuit, &cone)?;
        match &cfg.estimator {
            Estimator::Exact => {
                let rho = run_exact(&program, &channels, &cfg.noise)?;
                mean += expectation(&rho, &support, &terms)?;
            }
            Estimator::Shots { n_shots, seed } => {
                let rho = run_exact(&program, &channels, &cfg.noise)?;
                let e = sample_shots(&rho, &support, &terms, *n_shots, seed.wrapping_add(gi as u64))?;
                mean += e.mean;
                var += e.stderr * e.stderr;
            }
            Estimator::Trajectory {
                n_trajectories,
                batches,
                seed,
            } => {
                let nb = (*batches).max(2);
                let per = (n_trajectories / nb).max(1);
                let mut vals = Vec::with_capacity(nb);
                for b in 0..nb {
                    let mut tc = TrajectoryConfig::new(per, seed.wrapping_add((gi * nb + b) as u64));
                    tc.stratify = false;
                    let r = run_trajectories::<f64>(&program, &channels, &cfg.noise, &tc)?;
                    vals.push(expectation(&r.rdm, &support, &terms)?);
                }
                let m = vals.iter().sum::<f64>() / nb as f64;
                let s2 = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nb as f64 - 1.0);
                mean += m;
                var += s2 / nb as f64;
            }
        }
    }
    Ok(EnergyEstimate {
        mean,
        stderr: var.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Per-gate SPSA settings; `max_iters` is the per-gate budget.
    pub spsa: SpsaConfig,
    pub n_sweeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub iteration: usize,
    /// Energy per site.
    pub energy: f64,
    pub energy_stderr: f64,
    /// Parameter set being optimized.
    pub gate_index: usize,
    pub sweep: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub circuit: DmeraCircuit,
    pub initial: EnergyEstimate,
    /// Total energy after each sweep.
    pub sweep_energies: Vec<EnergyEstimate>,
    /// One record per gate update attempt.
    pub trace: Vec<SweepRecord>,
    pub final_energy: EnergyEstimate,
}

/// Sequential SPSA over parameter sets in index order. A gate update is
/// kept only if the measured energy does not rise by more than twice the
/// standard error of the current estimate.
pub fn sweep_optimize(
    circuit: &DmeraCircuit,
    h: &PauliHamiltonian,
    engine: &EngineConfig,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    cfg.spsa.validate()?;
    let n_sites = circuit.spec().n_sites() as f64;
    let initial = circuit_energy(circuit, h, engine)?;
    let mut current = circuit.clone();
    let mut energy = initial;
    let mut trace = Vec::new();
    let mut sweep_energies = Vec::with_capacity(cfg.n_sweeps);
    let mut iteration = 0;
    for sweep in 0..cfg.n_sweeps {
        for set in 0..current.param_sets().len() {
            if cfg.spsa.max_iters == 0 {
                continue;
            }
            let base = current.clone();
            let mut objective = |x: &[f64]| -> Result<f64> {
                let c = base.with_param_set(set, GateParams::from_slice(x)?)?;
                Ok(circuit_energy(&c, h, engine)?.mean)
            };
            let spsa = SpsaConfig {
                seed: cfg.spsa.seed ^ ((sweep as u64) << 32 | set as u64),
                ..cfg.spsa.clone()
            };
            let x0 = current.param_sets()[set].0.to_vec();
            let run = run_spsa(&spsa, &mut objective, &x0)?;
            iteration += spsa.max_iters;
            let mut best: Option<(EnergyEstimate, DmeraCircuit)> = None;
            for cand in [&run.final_params, &run.best_params] {
                let c = current.with_param_set(set, GateParams::from_slice(cand)?)?;
                let e = circuit_energy(&c, h, engine)?;
                if best.as_ref().is_none_or(|b| e.mean < b.0.mean) {
                    best = Some((e, c));
                }
            }
            let (e_new, c_new) = best.expect("two candidates");
            let accepted = e_new.mean <= energy.mean + 2.0 * energy.stderr;
            if accepted {
                current = c_new;
                energy = e_new;
            }
            trace.push(SweepRecord {
                iteration,
                energy: energy.mean / n_sites,
                energy_stderr: energy.stderr / n_sites,
                gate_index: set,
                sweep,
                accepted,
            });
        }
        sweep_energies.push(energy);
    }
    Ok(SweepResult {
        circuit: current,
        initial,
        sweep_energies,
        trace,
        final_energy: energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{DmeraSpec, Init};
    use crate::models::{exact_ground_energy, tfim};

    #[test]
    fn gain_examples() {
        let cfg = SpsaConfig::default();
        let (a0, b0) = gains(0, &cfg);
        assert!((a0 - 0.05 / 11.0).abs() < 1e-18);
        assert!((b0 - 0.01).abs() < 1e-18);
        let mut prev = a0;
        for k in 1..100 {
            let (a, _) = gains(k, &cfg);
            assert!(a < prev);
            prev = a;
        }
        assert!(SpsaConfig { a: 0.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn descends_on_a_bowl() {
        let cfg = SpsaConfig {
            a: 1e-3,
            big_a: 0.0,
            ..SpsaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut bowl = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let mut good = 0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let s = spsa_step(0, &x, &cfg, &mut bowl, &mut rng).unwrap();
            let dot: f64 = s.params.iter().zip(&x).map(|(n, o)| (n - o) * o).sum();
            if dot < 0.0 {
                good += 1;
            }
        }
        assert!(good >= 99, "{good}");
    }

    #[test]
    fn constant_objective_leaves_point() {
        let cfg = SpsaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = vec![0.3, -0.2];
        let s = spsa_step(5, &x, &cfg, &mut |_: &[f64]| Ok(4.0), &mut rng).unwrap();
        assert_eq!(s.params, x);
    }

    #[test]
    fn non_finite_objective_aborts() {
        let cfg = SpsaConfig {
            max_iters: 5,
            ..SpsaConfig::default()
        };
        let mut calls = 0;
        let mut f = |_: &[f64]| {
            calls += 1;
            Ok(if calls > 3 { f64::NAN } else { 1.0 })
        };
        let err = run_spsa(&cfg, &mut f, &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteObjective { iteration: 1, .. }));
    }

    #[test]
    fn deterministic_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obj = QuadraticObjective::random(4, 5, 0.01, &mut rng).unwrap();
        let cfg = SpsaConfig {
            max_iters: 50,
            seed: 9,
            ..SpsaConfig::default()
        };
        let run = |s: u64| {
            let mut noise = ChaCha8Rng::seed_from_u64(s);
            let mut f = |x: &[f64]| evaluate_quadratic(&obj, &obj.unitary(x)?, &mut noise);
            run_spsa(&cfg, &mut f, &[0.1; 15]).unwrap()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1).final_params, run(2).final_params);
    }

    fn central_differences(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn averaged_estimate(f: &dyn Fn(&[f64]) -> f64, x: &[f64], draws: &[Vec<f64>]) -> Vec<f64> {
        let alpha = 1e-4;
        let mut est = vec![0.0; x.len()];
        for v in draws {
            let p: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + alpha * b).collect();
            let m: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - alpha * b).collect();
            let g = (f(&p) - f(&m)) / (2.0 * alpha);
            for (e, vi) in est.iter_mut().zip(v) {
                *e += g * vi / draws.len() as f64;
            }
        }
        est
    }

    #[test]
    fn gradient_estimate_balanced_design() {
        // 1000 draws cycling through all 8 sign patterns: cross terms cancel
        // and only the O(alpha^2) bias remains.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let draws: Vec<Vec<f64>> = (0..1000)
            .map(|k| (0..3).map(|i| if (k >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect();
        for _ in 0..20 {
            let obj = QuadraticObjective::random(2, 5, 0.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |y: &[f64]| obj.exact(&obj.unitary(y).unwrap());
            let fd = central_differences(&f, &x);
            let est = averaged_estimate(&f, &x, &draws);
            for i in 0..3 {
                if fd[i].abs() > 1e-3 {
                    assert!((est[i] - fd[i]).abs() <= 0.05 * fd[i].abs(), "{i}: {} vs {}", est[i], fd[i]);
                }
            }
        }
    }

    #[test]
    fn gradient_estimate_random_draws() {
        // Independent draws; the cross-term noise is |g| / sqrt(n) per
        // component, so the 5% check is applied to dominant components.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let obj = QuadraticObjective::random(2, 5, 0.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = |y: &[f64]| obj.exact(&obj.unitary(y).unwrap());
            let fd = central_differences(&f, &x);
            let draws: Vec<Vec<f64>> = (0..100_000).map(|_| rademacher(3, &mut rng)).collect();
            let est = averaged_estimate(&f, &x, &draws);
            let gmax = fd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for i in 0..3 {
                if fd[i].abs() >= 0.5 * gmax {
                    assert!((est[i] - fd[i]).abs() <= 0.05 * fd[i].abs(), "{i}: {} vs {}", est[i], fd[i]);
                }
            }
        }
    }

    #[test]
    fn quadratic_examples() {
        let id = DMatrix::<Complex64>::identity(2, 2);
        let zero = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0].map(|v| Complex64::new(v, 0.0)));
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let obj = QuadraticObjective::new(vec![(zero.clone(), z.clone())], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((evaluate_quadratic(&obj, &id, &mut rng).unwrap() - 1.0).abs() < 1e-15);
        assert!((evaluate_quadratic(&obj, &x, &mut rng).unwrap() + 1.0).abs() < 1e-15);
        let bad = &x * Complex64::new(1.1, 0.0);
        assert!(matches!(evaluate_quadratic(&obj, &bad, &mut rng), Err(Error::NotUnitary(_))));
        let noisy = QuadraticObjective::new(vec![(zero, z)], 0.01).unwrap();
        let n = 20000;
        let vals: Vec<f64> = (0..n).map(|_| evaluate_quadratic(&noisy, &id, &mut rng).unwrap()).collect();
        let m = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((m - 1.0).abs() < 5e-4 && (sd - 0.01).abs() < 5e-4);
    }

    #[test]
    fn change_of_variables() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let obj = QuadraticObjective::random(4, 5, 0.0, &mut rng).unwrap();
        let u = crate::linalg::haar_su(4, &mut rng);
        let v = crate::linalg::haar_su(4, &mut rng);
        let rotated = QuadraticObjective::new(
            obj.terms.iter().map(|(r, h)| (r.clone(), &v * h * v.adjoint())).collect(),
            0.0,
        )
        .unwrap();
        assert!((obj.exact(&(&u * &v)) - rotated.exact(&u)).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_terms() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let rho = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(0.5, 0.0);
        assert!(matches!(QuadraticObjective::new(vec![(rho.clone(), h)], 0.0), Err(Error::NonHermitian(_))));
        let neg = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, -0.5].map(|v| Complex64::new(v, 0.0)));
        assert!(QuadraticObjective::new(vec![(neg, rho)], 0.0).is_err());
    }

    #[test]
    fn energy_grouping_matches_per_term_evaluation() {
        let c = DmeraCircuit::random(DmeraSpec::new(3, 2), 2).unwrap();
        let h = tfim(8, 0.8, true).unwrap();
        let cfg = EngineConfig::exact(NoiseModel::depolarizing(1e-2));
        let grouped = circuit_energy(&c, &h, &cfg).unwrap();
        let mut direct = 0.0;
        for t in &h.terms {
            let sup: Vec<usize> = t.support().collect();
            let rho = crate::engine::contract_exact::<f64>(&c, &sup, &cfg.noise).unwrap();
            direct += expectation(&rho, &sup, std::slice::from_ref(t)).unwrap();
        }
        assert!((grouped.mean - direct).abs() < 1e-12);
        assert_eq!(grouped.stderr, 0.0);
        let shots = EngineConfig {
            estimator: Estimator::Shots { n_shots: 4000, seed: 1 },
            ..cfg.clone()
        };
        let s = circuit_energy(&c, &h, &shots).unwrap();
        assert!(s.stderr > 0.0 && (s.mean - grouped.mean).abs() < 6.0 * s.stderr);
    }

    #[test]
    fn sweeps_stay_above_ground_energy() {
        let c = DmeraCircuit::build(DmeraSpec::new(3, 2), true, Init::Identity).unwrap();
        let h = tfim(8, 1.0, true).unwrap();
        let e0 = exact_ground_energy(&h).unwrap();
        let cfg = SweepConfig {
            spsa: SpsaConfig {
                a: 0.1,
                b: 0.2,
                big_a: 0.0,
                max_iters: 30,
                ..SpsaConfig::default()
            },
            n_sweeps: 2,
        };
        let engine = EngineConfig::exact(NoiseModel::ideal());
        let r = sweep_optimize(&c, &h, &engine, &cfg).unwrap();
        assert!((r.initial.mean + 8.0).abs() < 1e-12);
        assert!(r.final_energy.mean >= e0 - 1e-9);
        assert!(r.final_energy.mean < r.initial.mean, "{:?}", r.final_energy);
        assert_eq!(r.trace.len(), 2 * 6);
        // Shared mode has one set per (scale, layer).
        assert_eq!(r.circuit.param_sets().len(), 3 * 2);
        let again = circuit_energy(&r.circuit, &h, &engine).unwrap();
        assert!((again.mean - r.final_energy.mean).abs() < 1e-12);
    }

    #[test]
    fn zero_iteration_sweep_changes_nothing() {
        let c = DmeraCircuit::random(DmeraSpec::new(2, 1), 3).unwrap();
        let h = tfim(4, 1.0, true).unwrap();
        let cfg = SweepConfig {
            spsa: SpsaConfig {
                max_iters: 0,
                ..SpsaConfig::default()
            },
            n_sweeps: 3,
        };
        let r = sweep_optimize(&c, &h, &EngineConfig::exact(NoiseModel::ideal()), &cfg).unwrap();
        assert_eq!(r.circuit.param_sets(), c.param_sets());
        assert_eq!(r.final_energy, r.initial);
    }

    #[test]
    fn lattice_mismatch_is_reported_before_optimizing() {
        let c = DmeraCircuit::random(DmeraSpec::new(2, 1), 3).unwrap();
        let h = tfim(8, 1.0, true).unwrap();
        let cfg = SweepConfig {
            spsa: SpsaConfig::default(),
            n_sweeps: 1,
        };
        assert!(matches!(
            sweep_optimize(&c, &h, &EngineConfig::exact(NoiseModel::ideal()), &cfg),
            Err(Error::InvalidSpec(_))
        ));
    }
}
