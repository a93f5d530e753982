use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expi_hermitian, from_dmatrix4, haar_su, su_log, Mat4};
use crate::pauli::two_qubit_matrix;

pub const N_GENERATORS: usize = 15;

/// Fifteen generator angles of one SU(4) element,
/// `U = exp(i * sum_k theta_k G_k)` where `G_k` runs over the non-identity
/// two-qubit Paulis in the order `IX, IY, IZ, XI, XX, ..., ZZ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateParams(pub [f64; N_GENERATORS]);

impl Default for GateParams {
    fn default() -> Self {
        GateParams([0.0; N_GENERATORS])
    }
}

impl GateParams {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != N_GENERATORS {
            return Err(Error::ParamCount {
                expected: N_GENERATORS,
                got: v.len(),
            });
        }
        let mut a = [0.0; N_GENERATORS];
        a.copy_from_slice(v);
        Ok(GateParams(a))
    }

    /// Hermitian generator `sum_k theta_k G_k`.
    pub fn generator(&self) -> DMatrix<Complex64> {
        let mut h = DMatrix::<Complex64>::zeros(4, 4);
        for (k, &t) in self.0.iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let g = two_qubit_matrix::<f64>(k + 1);
            for i in 0..4 {
                for j in 0..4 {
                    h[(i, j)] += g[4 * i + j] * t;
                }
            }
        }
        h
    }

    /// Angles of a Haar-random SU(4) element.
    pub fn haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_unitary(&haar_su(4, rng))
    }

    /// I.i.d. Gaussian angles with standard deviation `sigma`.
    pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Self {
        let mut a = [0.0; N_GENERATORS];
        for t in a.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *t = sigma * z;
        }
        GateParams(a)
    }

    /// Angles reproducing a given SU(4) matrix (principal logarithm).
    pub fn from_unitary(u: &DMatrix<Complex64>) -> Self {
        let h = su_log(u);
        let mut a = [0.0; N_GENERATORS];
        for (k, t) in a.iter_mut().enumerate() {
            let g = two_qubit_matrix::<f64>(k + 1);
            let mut tr = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    tr += h[(i, j)] * g[4 * j + i];
                }
            }
            *t = tr.re / 4.0;
        }
        GateParams(a)
    }
}

/// Materializes the 4x4 unitary of a parameter vector.
pub fn gate_unitary(params: &GateParams) -> Result<Mat4<f64>> {
    if let Some(index) = params.0.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFiniteParam { index });
    }
    Ok(from_dmatrix4(&expi_hermitian(&params.generator())))
}
