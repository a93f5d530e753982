use super::program::{Op, Program};
use super::state::{DensityMatrix, Mat2};
use super::{Channels, GateOp, NoiseModel};
use crate::error::{Error, Result};
use crate::linalg::dagger4;
use crate::scalar::{cone, czero, Real};

/// Largest live register the density-matrix engine accepts.
pub const DENSITY_LIMIT: usize = 14;

/// Runs `program` on density matrices and returns the state of its outputs.
pub fn run_exact<T: Real>(
    program: &Program,
    channels: &Channels<T>,
    noise: &NoiseModel,
) -> Result<DensityMatrix<T>> {
    noise.validate()?;
    let needed = program.peak_live();
    if needed > DENSITY_LIMIT {
        return Err(Error::WindowTooLarge {
            engine: "density-matrix",
            needed,
            limit: DENSITY_LIMIT,
        });
    }
    if !program.inputs.is_empty() {
        return Err(Error::InvalidSpec(
            "program expects input qubits; use run_exact_from".into(),
        ));
    }
    run_exact_from(program, channels, noise, DensityMatrix::empty())
}

/// Runs `program` starting from a state on its input ids.
pub fn run_exact_from<T: Real>(
    program: &Program,
    channels: &Channels<T>,
    noise: &NoiseModel,
    mut state: DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    for op in &program.ops {
        match *op {
            Op::Prep { q, prep } => {
                state.add_qubit(q, &channels.preps[prep]);
                state.depolarize1(q, noise.p_prep)?;
            }
            Op::Gate { a, b, gate } => {
                match &channels.gates[gate] {
                    GateOp::Unitary(u) => state.apply_unitary(a, b, u)?,
                    GateOp::Kraus(k) => state.apply_kraus(a, b, k)?,
                }
                state.depolarize2(a, b, noise.p_gate)?;
            }
            Op::Discard { q } => state.discard(q)?,
        }
    }
    let mut out = state.reorder(&program.outputs)?;
    for &q in &program.outputs {
        out.depolarize1(q, noise.p_meas)?;
    }
    Ok(out)
}

/// Heisenberg picture: maps an operator on the program outputs back to an
/// operator on its inputs, `O -> Phi(O)` with `Tr(rho Phi(O)) = Tr(run(rho) O)`.
pub fn run_heisenberg<T: Real>(
    program: &Program,
    channels: &Channels<T>,
    noise: &NoiseModel,
    operator: DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    noise.validate()?;
    let mut o = operator.reorder(&program.outputs)?;
    for &q in &program.outputs {
        o.depolarize1(q, noise.p_meas)?;
    }
    let identity: Mat2<T> = [cone(), czero(), czero(), cone()];
    for op in program.ops.iter().rev() {
        match *op {
            Op::Discard { q } => o.add_qubit(q, &identity),
            Op::Gate { a, b, gate } => {
                // Depolarizing noise is self-dual.
                o.depolarize2(a, b, noise.p_gate)?;
                match &channels.gates[gate] {
                    GateOp::Unitary(u) => o.apply_unitary(a, b, &dagger4(u))?,
                    GateOp::Kraus(k) => {
                        let kd: Vec<_> = k.iter().map(dagger4).collect();
                        o.apply_kraus(a, b, &kd)?
                    }
                }
            }
            Op::Prep { q, prep } => {
                o.depolarize1(q, noise.p_prep)?;
                o.contract(q, &channels.preps[prep])?;
            }
        }
    }
    o.reorder(&program.inputs)
}
