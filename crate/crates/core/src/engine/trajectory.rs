//! Monte-Carlo trajectories on state vectors.
//!
//! Each noise location inserts a uniformly random non-identity Pauli with its
//! error probability. A discarded qubit stays in the register until the
//! register would exceed its budget; then the oldest discarded qubit is
//! measured in the Z basis and removed. Remaining discarded qubits are traced
//! out exactly at the end, so with a large enough budget a trajectory is exact
//! up to the sampled errors.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::program::{Op, Program};
use super::state::{zero_state, DensityMatrix, StateVector};
use super::{Channels, GateOp, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::Mat4;
use crate::pauli::{two_qubit_pauli, Pauli};
use crate::scalar::Real;

/// Largest register the state-vector engine accepts.
pub const VECTOR_LIMIT: usize = 22;

/// Trajectories per deterministic work unit.
const CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub n_trajectories: usize,
    pub seed: u64,
    /// Discarded qubits kept beyond the program's peak before measuring.
    pub extra_live: usize,
    /// Paired runs: condition every trajectory on at least one error and
    /// reweight analytically.
    pub stratify: bool,
}

impl TrajectoryConfig {
    pub fn new(n_trajectories: usize, seed: u64) -> Self {
        TrajectoryConfig {
            n_trajectories,
            seed,
            extra_live: 2,
            stratify: true,
        }
    }

    fn budget(&self, peak: usize) -> usize {
        peak.max((peak + self.extra_live).min(VECTOR_LIMIT))
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult<T: Real> {
    pub rdm: DensityMatrix<T>,
    pub n_trajectories: usize,
    /// Noise locations (gates and preparations) in the program.
    pub noise_locations: usize,
    /// Pauli errors inserted over all trajectories.
    pub errors_inserted: u64,
    /// Mid-circuit measurements over all trajectories.
    pub measurements: u64,
    pub register_limit: usize,
}

#[derive(Clone, Debug)]
pub struct PairedResult<T: Real> {
    pub ideal: DensityMatrix<T>,
    pub noisy: DensityMatrix<T>,
    pub n_trajectories: usize,
    pub noise_locations: usize,
    /// Probability that a run has no error at any location.
    pub error_free_probability: f64,
    pub errors_inserted: u64,
    pub measurements: u64,
    pub register_limit: usize,
}

fn check_unitary<T: Real>(program: &Program, channels: &Channels<T>) -> Result<Vec<Mat4<T>>> {
    if !program.inputs.is_empty() {
        return Err(Error::InvalidSpec(
            "trajectory programs cannot take input qubits".into(),
        ));
    }
    let zero = zero_state::<T>();
    let mut us = Vec::with_capacity(channels.gates.len());
    for op in &program.ops {
        if let Op::Prep { prep, .. } = *op {
            if channels.preps[prep] != zero {
                return Err(Error::InvalidSpec(
                    "trajectory engine needs |0> preparations".into(),
                ));
            }
        }
    }
    for g in &channels.gates {
        match g {
            GateOp::Unitary(u) => us.push(*u),
            GateOp::Kraus(_) => {
                return Err(Error::InvalidSpec(
                    "trajectory engine needs unitary gates".into(),
                ))
            }
        }
    }
    Ok(us)
}

/// Per-op error probability; zero for discards.
fn location_probs(program: &Program, noise: &NoiseModel) -> Vec<f64> {
    program
        .ops
        .iter()
        .map(|op| match op {
            Op::Prep { .. } => noise.p_prep,
            Op::Gate { .. } => noise.p_gate,
            Op::Discard { .. } => 0.0,
        })
        .collect()
}

fn random_pauli1<R: Rng>(rng: &mut R) -> Pauli {
    Pauli::from_index(rng.random_range(1..4))
}

fn random_pauli2<R: Rng>(rng: &mut R) -> (Pauli, Pauli) {
    two_qubit_pauli(rng.random_range(1..16))
}

struct Stats {
    errors: u64,
    measurements: u64,
}

/// Plain average of noisy trajectories.
pub fn run_trajectories<T: Real>(
    program: &Program,
    channels: &Channels<T>,
    noise: &NoiseModel,
    config: &TrajectoryConfig,
) -> Result<TrajectoryResult<T>> {
    noise.validate()?;
    let unitaries = check_unitary(program, channels)?;
    let peak = program.peak_live();
    if peak > VECTOR_LIMIT {
        return Err(Error::WindowTooLarge {
            engine: "state-vector",
            needed: peak,
            limit: VECTOR_LIMIT,
        });
    }
    let budget = config.budget(peak);
    let probs = location_probs(program, noise);
    let n = config.n_trajectories.max(1);
    let chunks: Vec<Result<(DensityMatrix<T>, Stats)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc: Option<DensityMatrix<T>> = None;
            let mut stats = Stats {
                errors: 0,
                measurements: 0,
            };
            for t in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let mut sv = StateVector::<T>::empty();
                let mut deferred = VecDeque::new();
                for (op, &p) in program.ops.iter().zip(&probs) {
                    step(
                        &mut sv,
                        &mut deferred,
                        op,
                        &unitaries,
                        budget,
                        p > 0.0 && rng.random::<f64>() < p,
                        &mut rng,
                        &mut stats,
                    )?;
                }
                let mut rho = sv.reduced(&program.outputs)?;
                for &q in &program.outputs {
                    rho.depolarize1(q, noise.p_meas)?;
                }
                match acc.as_mut() {
                    None => acc = Some(rho),
                    Some(a) => a.add_scaled(&rho, T::one())?,
                }
            }
            Ok((acc.expect("non-empty chunk"), stats))
        })
        .collect();
    let mut total: Option<DensityMatrix<T>> = None;
    let mut errors = 0;
    let mut measurements = 0;
    for c in chunks {
        let (rho, s) = c?;
        errors += s.errors;
        measurements += s.measurements;
        match total.as_mut() {
            None => total = Some(rho),
            Some(t) => t.add_scaled(&rho, T::one())?,
        }
    }
    let mut rdm = total.expect("at least one trajectory");
    rdm.scale(T::lit(1.0 / n as f64));
    Ok(TrajectoryResult {
        rdm,
        n_trajectories: n,
        noise_locations: probs.iter().filter(|&&p| p > 0.0).count(),
        errors_inserted: errors,
        measurements,
        register_limit: budget,
    })
}

#[allow(clippy::too_many_arguments)]
fn step<T: Real, R: Rng>(
    sv: &mut StateVector<T>,
    deferred: &mut VecDeque<usize>,
    op: &Op,
    unitaries: &[Mat4<T>],
    budget: usize,
    error: bool,
    rng: &mut R,
    stats: &mut Stats,
) -> Result<()> {
    match *op {
        Op::Prep { q, .. } => {
            while sv.n_qubits() + 1 > budget {
                let d = deferred.pop_front().ok_or(Error::WindowTooLarge {
                    engine: "state-vector",
                    needed: sv.n_qubits() + 1,
                    limit: budget,
                })?;
                sv.measure_out(d, rng)?;
                stats.measurements += 1;
            }
            let p = if error {
                stats.errors += 1;
                random_pauli1(rng)
            } else {
                Pauli::I
            };
            sv.add_qubit(q, p);
        }
        Op::Gate { a, b, gate } => {
            sv.apply_unitary(a, b, &unitaries[gate])?;
            if error {
                stats.errors += 1;
                let (pa, pb) = random_pauli2(rng);
                sv.apply_pauli(a, pa)?;
                sv.apply_pauli(b, pb)?;
            }
        }
        Op::Discard { q } => deferred.push_back(q),
    }
    Ok(())
}

/// Outcome-1 probability; a branch of weight zero reports 1/2.
fn branch_prob_one<T: Real>(s: &StateVector<T>, q: usize) -> Result<f64> {
    let n = s.norm_sqr();
    if n > 0.0 {
        Ok(s.prob_one(q)? / n)
    } else {
        Ok(0.5)
    }
}

/// Ideal and noisy branch pair sharing measurement randomness.
struct Pair<T: Real> {
    ideal: StateVector<T>,
    noisy: Option<StateVector<T>>,
    w_ideal: f64,
    w_noisy: f64,
}

impl<T: Real> Pair<T> {
    fn split(&mut self) -> &mut StateVector<T> {
        if self.noisy.is_none() {
            self.noisy = Some(self.ideal.clone());
        }
        self.noisy.as_mut().unwrap()
    }

    fn measure<R: Rng>(&mut self, q: usize, rng: &mut R) -> Result<()> {
        match self.noisy.as_mut() {
            None => {
                self.ideal.measure_out(q, rng)?;
            }
            Some(noisy) => {
                let p_i = branch_prob_one(&self.ideal, q)?;
                let p_n = branch_prob_one(noisy, q)?;
                let q1 = 0.5 * (p_i + p_n);
                let o = (rng.random::<f64>() < q1) as usize;
                let (pi, pn, qo) = if o == 1 {
                    (p_i, p_n, q1)
                } else {
                    (1.0 - p_i, 1.0 - p_n, 1.0 - q1)
                };
                self.w_ideal *= pi / qo;
                self.w_noisy *= pn / qo;
                for (s, po) in [(&mut self.ideal, pi), (noisy, pn)] {
                    s.project_out(q, o)?;
                    let n = s.norm_sqr();
                    if po > 0.0 && n > 0.0 {
                        s.scale(T::lit(1.0 / n.sqrt()));
                    }
                }
            }
        }
        Ok(())
    }

    fn n_qubits(&self) -> usize {
        self.ideal.n_qubits()
    }
}

/// Ideal and noisy reduced states from paired trajectories.
///
/// Both branches see the same sampled measurement outcomes (drawn from the
/// average of their outcome distributions, with importance weights), so the
/// two estimates differ only through the inserted errors. With `stratify`
/// every trajectory carries at least one error and the error-free mass is
/// added back analytically.
pub fn run_paired<T: Real>(
    program: &Program,
    channels: &Channels<T>,
    noise: &NoiseModel,
    config: &TrajectoryConfig,
) -> Result<PairedResult<T>> {
    noise.validate()?;
    let unitaries = check_unitary(program, channels)?;
    let peak = program.peak_live();
    if peak > VECTOR_LIMIT {
        return Err(Error::WindowTooLarge {
            engine: "state-vector",
            needed: peak,
            limit: VECTOR_LIMIT,
        });
    }
    let budget = config.budget(peak);
    let probs = location_probs(program, noise);
    // P(no error before op i) for the conditioned first-error draw.
    let mut clean = vec![1.0f64; probs.len() + 1];
    for (i, p) in probs.iter().enumerate() {
        clean[i + 1] = clean[i] * (1.0 - p);
    }
    let p0 = clean[probs.len()];
    let stratify = config.stratify && p0 < 1.0;
    let n = config.n_trajectories.max(1);
    type Acc<T> = (DensityMatrix<T>, DensityMatrix<T>, Stats);
    let chunks: Vec<Result<Acc<T>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc: Option<(DensityMatrix<T>, DensityMatrix<T>)> = None;
            let mut stats = Stats {
                errors: 0,
                measurements: 0,
            };
            for t in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let first = if stratify {
                    // Inverse CDF of the first error location given at least one.
                    let u = rng.random::<f64>() * (1.0 - p0);
                    let k = clean.partition_point(|&c| 1.0 - c <= u);
                    Some(k.saturating_sub(1).min(probs.len() - 1))
                } else {
                    None
                };
                let mut pair = Pair {
                    ideal: StateVector::<T>::empty(),
                    noisy: None,
                    w_ideal: 1.0,
                    w_noisy: 1.0,
                };
                let mut deferred = VecDeque::new();
                for (i, (op, &p)) in program.ops.iter().zip(&probs).enumerate() {
                    let error = match first {
                        Some(f) if i < f => false,
                        Some(f) if i == f => true,
                        _ => p > 0.0 && rng.random::<f64>() < p,
                    };
                    match *op {
                        Op::Prep { q, .. } => {
                            while pair.n_qubits() + 1 > budget {
                                let d = deferred.pop_front().ok_or(Error::WindowTooLarge {
                                    engine: "state-vector",
                                    needed: pair.n_qubits() + 1,
                                    limit: budget,
                                })?;
                                pair.measure(d, &mut rng)?;
                                stats.measurements += 1;
                            }
                            if error {
                                stats.errors += 1;
                                let e = random_pauli1(&mut rng);
                                pair.split().add_qubit(q, e);
                                pair.ideal.add_qubit(q, Pauli::I);
                            } else {
                                pair.ideal.add_qubit(q, Pauli::I);
                                if let Some(nz) = pair.noisy.as_mut() {
                                    nz.add_qubit(q, Pauli::I);
                                }
                            }
                        }
                        Op::Gate { a, b, gate } => {
                            let u = &unitaries[gate];
                            pair.ideal.apply_unitary(a, b, u)?;
                            if let Some(nz) = pair.noisy.as_mut() {
                                nz.apply_unitary(a, b, u)?;
                            }
                            if error {
                                stats.errors += 1;
                                let (pa, pb) = random_pauli2(&mut rng);
                                let nz = pair.split();
                                nz.apply_pauli(a, pa)?;
                                nz.apply_pauli(b, pb)?;
                            }
                        }
                        Op::Discard { q } => deferred.push_back(q),
                    }
                }
                let mut ri = pair.ideal.reduced(&program.outputs)?;
                let mut rn = match &pair.noisy {
                    Some(nz) => nz.reduced(&program.outputs)?,
                    None => ri.clone(),
                };
                for &q in &program.outputs {
                    rn.depolarize1(q, noise.p_meas)?;
                }
                let (wi, wn) = if pair.noisy.is_some() {
                    (pair.w_ideal, pair.w_noisy)
                } else {
                    (1.0, 1.0)
                };
                ri.scale(T::lit(wi));
                rn.scale(T::lit(wn));
                match acc.as_mut() {
                    None => acc = Some((ri, rn)),
                    Some((ai, an)) => {
                        ai.add_scaled(&ri, T::one())?;
                        an.add_scaled(&rn, T::one())?;
                    }
                }
            }
            let (ai, an) = acc.expect("non-empty chunk");
            Ok((ai, an, stats))
        })
        .collect();
    let mut ideal: Option<DensityMatrix<T>> = None;
    let mut noisy: Option<DensityMatrix<T>> = None;
    let mut errors = 0;
    let mut measurements = 0;
    for c in chunks {
        let (ri, rn, s) = c?;
        errors += s.errors;
        measurements += s.measurements;
        match (ideal.as_mut(), noisy.as_mut()) {
            (Some(i), Some(n)) => {
                i.add_scaled(&ri, T::one())?;
                n.add_scaled(&rn, T::one())?;
            }
            _ => {
                ideal = Some(ri);
                noisy = Some(rn);
            }
        }
    }
    let inv = T::lit(1.0 / n as f64);
    let mut ideal = ideal.expect("at least one trajectory");
    let mut noisy = noisy.expect("at least one trajectory");
    ideal.scale(inv);
    noisy.scale(inv);
    if stratify {
        // rho_noisy = p0 * rho_ideal + (1 - p0) * rho_{>=1 error}
        let mut mixed = ideal.clone();
        if noise.p_meas > 0.0 {
            for &q in &program.outputs {
                mixed.depolarize1(q, noise.p_meas)?;
            }
        }
        noisy.scale(T::lit(1.0 - p0));
        noisy.add_scaled(&mixed, T::lit(p0))?;
    }
    Ok(PairedResult {
        ideal,
        noisy,
        n_trajectories: n,
        noise_locations: probs.iter().filter(|&&p| p > 0.0).count(),
        error_free_probability: p0,
        errors_inserted: errors,
        measurements,
        register_limit: budget,
    })
}
