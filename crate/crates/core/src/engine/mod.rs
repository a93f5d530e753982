//! Contraction of cones and schedules under ideal or noisy execution.
//!
//! The density-matrix engine is exact and limited to small live registers.
//! The trajectory engine samples Pauli errors on state vectors and reaches
//! wider cones at the price of statistical error.

mod exact;
mod observable;
mod program;
mod record;
mod state;
mod trajectory;

pub use exact::{run_exact, run_exact_from, run_heisenberg, DENSITY_LIMIT};
pub use observable::{expectation, pauli_matrix, sample_shots, ShotEstimate};
pub use program::{Op, Program};
pub use record::ResultRecord;
pub use state::{
    noisy_zero, trace_distance, zero_state, DensityMatrix, Mat2, QuantumState, StateVector,
};
pub use trajectory::{
    run_paired, run_trajectories, PairedResult, TrajectoryConfig, TrajectoryResult,
    VECTOR_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::circuit::{CausalCone, DmeraCircuit};
use crate::error::{Error, Result};
use crate::linalg::{cast4, Mat4};
use crate::scalar::{Real, C};

/// Independent depolarizing noise: two-qubit after every gate, single-qubit
/// after every preparation and on every output qubit before readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_gate: f64,
    pub p_prep: f64,
    pub p_meas: f64,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Gate noise only.
    pub fn depolarizing(p_gate: f64) -> Self {
        NoiseModel {
            p_gate,
            ..Self::default()
        }
    }

    pub fn with_prep(mut self, p: f64) -> Self {
        self.p_prep = p;
        self
    }

    pub fn with_meas(mut self, p: f64) -> Self {
        self.p_meas = p;
        self
    }

    pub fn is_ideal(&self) -> bool {
        self.p_gate == 0.0 && self.p_prep == 0.0 && self.p_meas == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.p_gate, self.p_prep, self.p_meas] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        Ok(())
    }
}

/// What a gate location does.
#[derive(Clone, Debug)]
pub enum GateOp<T: Real> {
    Unitary(Mat4<T>),
    /// Arbitrary CPTP map given by Kraus operators.
    Kraus(Vec<Mat4<T>>),
}

/// Per-location operations of a circuit, in circuit gate and prep order.
#[derive(Clone, Debug)]
pub struct Channels<T: Real> {
    pub gates: Vec<GateOp<T>>,
    pub preps: Vec<Mat2<T>>,
}

impl<T: Real> Channels<T> {
    pub fn from_circuit(circuit: &DmeraCircuit) -> Self {
        Channels {
            gates: (0..circuit.gates().len())
                .map(|g| GateOp::Unitary(cast4(circuit.unitary(g))))
                .collect(),
            preps: vec![zero_state(); circuit.spec().n_preps()],
        }
    }

    /// Replaces gate `g` by a CPTP map.
    pub fn replace_gate(&mut self, g: usize, kraus: &[Mat4<f64>]) {
        self.gates[g] = GateOp::Kraus(kraus.iter().map(cast4).collect());
    }

    /// Replaces preparation `i` by an arbitrary single-qubit state.
    pub fn replace_prep(&mut self, i: usize, state: &Mat2<f64>) {
        self.preps[i] = state.map(|z| C::new(T::lit(z.re), T::lit(z.im)));
    }

    pub fn is_unitary(&self) -> bool {
        self.gates.iter().all(|g| matches!(g, GateOp::Unitary(_)))
            && self
                .preps
                .iter()
                .all(|p| *p == zero_state::<T>())
    }
}

/// Exact reduced density matrix of `target` (ascending sites).
pub fn contract_exact<T: Real>(
    circuit: &DmeraCircuit,
    target: &[usize],
    noise: &NoiseModel,
) -> Result<DensityMatrix<T>> {
    let cone = CausalCone::new(circuit, target)?;
    let program = Program::from_cone(circuit, &cone)?;
    run_exact(&program, &Channels::from_circuit(circuit), noise)
}

/// Trajectory estimate of the reduced density matrix of `target`.
pub fn contract_trajectory<T: Real>(
    circuit: &DmeraCircuit,
    target: &[usize],
    noise: &NoiseModel,
    config: &TrajectoryConfig,
) -> Result<TrajectoryResult<T>> {
    let cone = CausalCone::new(circuit, target)?;
    let program = Program::from_cone(circuit, &cone)?;
    run_trajectories(&program, &Channels::from_circuit(circuit), noise, config)
}

/// Which engine contracts a cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineChoice {
    Exact,
    /// Paired trajectories: ideal and noisy branches share randomness.
    Trajectory { n_trajectories: usize, seed: u64 },
}

/// Ideal-versus-noisy comparison of one target region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub engine: String,
    pub trace_distance: f64,
    /// Noisy locations in the cone (gates and preparations).
    pub noise_locations: usize,
    /// Expected number of faulty locations per run.
    pub expected_errors: f64,
    /// Errors inserted by trajectory runs; zero for the exact engine.
    pub errors_inserted: u64,
    pub n_trajectories: usize,
    pub peak_live: usize,
    /// Noisy target state, row-major `[re, im]` pairs.
    pub rdm: Vec<[f64; 2]>,
}

/// Trace distance between the ideal and noisy states of `target`.
pub fn compare_noisy(
    circuit: &DmeraCircuit,
    target: &[usize],
    noise: &NoiseModel,
    choice: &EngineChoice,
) -> Result<Comparison> {
    let cone = CausalCone::new(circuit, target)?;
    let program = Program::from_cone(circuit, &cone)?;
    let channels = Channels::<f64>::from_circuit(circuit);
    let mut locations = 0usize;
    let mut expected = 0.0;
    for op in &program.ops {
        let p = match op {
            Op::Prep { .. } => noise.p_prep,
            Op::Gate { .. } => noise.p_gate,
            Op::Discard { .. } => 0.0,
        };
        if p > 0.0 {
            locations += 1;
            expected += p;
        }
    }
    let peak_live = program.peak_live();
    match choice {
        EngineChoice::Exact => {
            let ideal = run_exact(&program, &channels, &NoiseModel::ideal())?;
            let noisy = run_exact(&program, &channels, noise)?;
            Ok(Comparison {
                engine: "exact".into(),
                trace_distance: trace_distance(&ideal, &noisy)?,
                noise_locations: locations,
                expected_errors: expected,
                errors_inserted: 0,
                n_trajectories: 0,
                peak_live,
                rdm: ResultRecord::rdm_pairs(&noisy),
            })
        }
        EngineChoice::Trajectory {
            n_trajectories,
            seed,
        } => {
            let cfg = TrajectoryConfig::new(*n_trajectories, *seed);
            let r = run_paired(&program, &channels, noise, &cfg)?;
            Ok(Comparison {
                engine: "trajectory".into(),
                trace_distance: trace_distance(&r.ideal, &r.noisy)?,
                noise_locations: locations,
                expected_errors: expected,
                errors_inserted: r.errors_inserted,
                n_trajectories: r.n_trajectories,
                peak_live,
                rdm: ResultRecord::rdm_pairs(&r.noisy),
            })
        }
    }
}
