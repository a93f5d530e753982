//! Small dense complex linear algebra used by gates, channels and oracles.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{czero, modulus, Real, C};

/// Row-major 4x4 complex matrix (a two-qubit operator).
pub type Mat4<T> = [C<T>; 16];

pub fn identity4<T: Real>() -> Mat4<T> {
    let mut m = [czero::<T>(); 16];
    for i in 0..4 {
        m[5 * i] = C::new(T::one(), T::zero());
    }
    m
}

pub fn mul4<T: Real>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut o = [czero::<T>(); 16];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[4 * i + k];
            for j in 0..4 {
                o[4 * i + j] += aik * b[4 * k + j];
            }
        }
    }
    o
}

pub fn dagger4<T: Real>(a: &Mat4<T>) -> Mat4<T> {
    let mut o = [czero::<T>(); 16];
    for i in 0..4 {
        for j in 0..4 {
            o[4 * j + i] = a[4 * i + j].conj();
        }
    }
    o
}

/// Max-norm distance of `U U^dagger` from the identity.
pub fn unitarity_defect4<T: Real>(u: &Mat4<T>) -> f64 {
    let p = mul4(u, &dagger4(u));
    let id = identity4::<T>();
    p.iter()
        .zip(id.iter())
        .map(|(x, y)| modulus(*x - *y).as_f64())
        .fold(0.0, f64::max)
}

pub fn cast4<T: Real>(m: &Mat4<f64>) -> Mat4<T> {
    m.map(|z| C::new(T::lit(z.re), T::lit(z.im)))
}

pub fn to_dmatrix<T: Real>(data: &[C<T>], dim: usize) -> DMatrix<C<T>> {
    DMatrix::from_row_slice(dim, dim, data)
}

pub fn from_dmatrix4(m: &DMatrix<Complex64>) -> Mat4<f64> {
    let mut o = [Complex64::new(0.0, 0.0); 16];
    for i in 0..4 {
        for j in 0..4 {
            o[4 * i + j] = m[(i, j)];
        }
    }
    o
}

/// Eigenvalues of a Hermitian matrix given row-major.
pub fn hermitian_eigenvalues<T: Real>(data: &[C<T>], dim: usize) -> Vec<T> {
    let m = to_dmatrix(data, dim);
    // Symmetrize so roundoff asymmetry cannot leak into the solver.
    let h = (&m + m.adjoint()).map(|z| z * T::lit(0.5));
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// `exp(i H)` for Hermitian `H`, via its eigendecomposition.
pub fn expi_hermitian(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let n = h.nrows();
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = Complex64::from_polar(1.0, eig.eigenvalues[k]);
    }
    v * d * v.adjoint()
}

/// Haar-random element of SU(n): QR of a complex Ginibre matrix with the
/// phases of R's diagonal divided out, then the determinant phase removed.
pub fn haar_su<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    let det = u.determinant();
    let fix = Complex64::from_polar(1.0, -det.arg() / n as f64);
    u * fix
}

/// Kraus operators of a random two-qubit CPTP map of the given rank, cut from
/// a Haar isometry `C^4 -> C^(4 rank)`.
pub fn random_kraus<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Vec<Mat4<f64>> {
    let v = haar_su(4 * rank.max(1), rng);
    (0..rank.max(1))
        .map(|k| {
            let mut m = [Complex64::new(0.0, 0.0); 16];
            for r in 0..4 {
                for c in 0..4 {
                    m[4 * r + c] = v[(4 * k + r, c)];
                }
            }
            m
        })
        .collect()
}

/// Random full-rank single-qubit density matrix, row-major.
pub fn random_qubit_state<R: Rng + ?Sized>(rng: &mut R) -> [Complex64; 4] {
    let g = DMatrix::<Complex64>::from_fn(2, 2, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint();
    let t = m.trace();
    [m[(0, 0)] / t, m[(0, 1)] / t, m[(1, 0)] / t, m[(1, 1)] / t]
}

/// Hermitian `H` with `exp(i H) = U` and `Tr H = 0`, for `U` in SU(n).
///
/// Uses the complex Schur form, which is diagonal for a normal matrix.
/// Eigenphases are shifted by multiples of 2 pi so that they sum to zero.
pub fn su_log(u: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = u.nrows();
    let (q, t) = nalgebra::Schur::new(u.clone()).unpack();
    let mut phases: Vec<f64> = (0..n).map(|k| t[(k, k)].arg()).collect();
    let tau = std::f64::consts::TAU;
    let total: f64 = phases.iter().sum();
    let m = (total / tau).round() as i64;
    // Shift the largest (or smallest) phases to bring the sum back to zero.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phases[b].partial_cmp(&phases[a]).unwrap());
    if m > 0 {
        for &k in order.iter().take(m as usize) {
            phases[k] -= tau;
        }
    } else if m < 0 {
        for &k in order.iter().rev().take((-m) as usize) {
            phases[k] += tau;
        }
    }
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        d[(k, k)] = Complex64::new(phases[k], 0.0);
    }
    &q * d * q.adjoint()
}
