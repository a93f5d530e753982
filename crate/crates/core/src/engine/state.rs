//! Density-matrix and state-vector kernels.
//!
//! States carry an ordered list of qubit ids. Position `j` in that list is
//! bit `k-1-j` of a basis index, so the first qubit is the most significant
//! and a newly added qubit becomes the least significant bit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, Mat4};
use crate::pauli::Pauli;
use crate::scalar::{cone, czero, modulus, norm_sqr, Real, C};

/// 2x2 row-major single-qubit operator.
pub type Mat2<T> = [C<T>; 4];

pub fn zero_state<T: Real>() -> Mat2<T> {
    [cone(), czero(), czero(), czero()]
}

/// `|0><0|` after single-qubit depolarizing noise of strength `p`.
pub fn noisy_zero<T: Real>(p: f64) -> Mat2<T> {
    let f = T::lit(2.0 * p / 3.0);
    [C::new(T::one() - f, T::zero()), czero(), czero(), C::new(f, T::zero())]
}

#[inline]
fn insert_bit(x: usize, bit: usize, v: usize) -> usize {
    let low = x & ((1 << bit) - 1);
    ((x >> bit) << (bit + 1)) | (v << bit) | low
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Real> {
    qubits: Vec<usize>,
    data: Vec<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Zero-qubit state (the scalar 1).
    pub fn empty() -> Self {
        DensityMatrix {
            qubits: Vec::new(),
            data: vec![cone()],
        }
    }

    /// `|0...0><0...0|` on the given ids.
    pub fn zeros(qubits: &[usize]) -> Self {
        let mut s = Self::empty();
        for &q in qubits {
            s.add_qubit(q, &zero_state());
        }
        s
    }

    pub fn from_data(qubits: Vec<usize>, data: Vec<C<T>>) -> Result<Self> {
        let dim = 1usize << qubits.len();
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(data.len(), dim * dim));
        }
        Ok(DensityMatrix { qubits, data })
    }

    /// Pure state `|psi><psi|`.
    pub fn from_pure(qubits: Vec<usize>, psi: &[C<T>]) -> Result<Self> {
        let dim = psi.len();
        if dim != 1 << qubits.len() {
            return Err(Error::DimensionMismatch(dim, 1 << qubits.len()));
        }
        let mut data = vec![czero(); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = psi[r] * psi[c].conj();
            }
        }
        Ok(DensityMatrix { qubits, data })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    /// Row-major entries.
    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C<T> {
        self.data[r * self.dim() + c]
    }

    pub fn position(&self, q: usize) -> Result<usize> {
        self.qubits
            .iter()
            .position(|&x| x == q)
            .ok_or(Error::DeadQubit(q))
    }

    fn bit(&self, q: usize) -> Result<usize> {
        Ok(self.n_qubits() - 1 - self.position(q)?)
    }

    pub fn trace(&self) -> C<T> {
        let d = self.dim();
        (0..d).fold(czero(), |acc, i| acc + self.data[i * d + i])
    }

    /// Appends qubit `q` in state `sigma` as the new least significant bit.
    pub fn add_qubit(&mut self, q: usize, sigma: &Mat2<T>) {
        let d = self.dim();
        let nd = 2 * d;
        let mut out = vec![czero(); nd * nd];
        for r in 0..d {
            for c in 0..d {
                let v = self.data[r * d + c];
                if v == czero() {
                    continue;
                }
                let base = (2 * r) * nd + 2 * c;
                out[base] = v * sigma[0];
                out[base + 1] = v * sigma[1];
                out[base + nd] = v * sigma[2];
                out[base + nd + 1] = v * sigma[3];
            }
        }
        self.data = out;
        self.qubits.push(q);
    }

    /// `rho -> U rho U^dagger` with `U` acting on `(a, b)`, `a` as the high bit.
    pub fn apply_unitary(&mut self, a: usize, b: usize, u: &Mat4<T>) -> Result<()> {
        let (ba, bb) = (self.bit(a)?, self.bit(b)?);
        self.left_mul(ba, bb, u);
        self.right_mul_dagger(ba, bb, u);
        Ok(())
    }

    fn left_mul(&mut self, ba: usize, bb: usize, u: &Mat4<T>) {
        let d = self.dim();
        let (ma, mb) = (1 << ba, 1 << bb);
        for r in 0..d {
            if r & (ma | mb) != 0 {
                continue;
            }
            let rows = [r, r | mb, r | ma, r | ma | mb];
            for c in 0..d {
                let v = [
                    self.data[rows[0] * d + c],
                    self.data[rows[1] * d + c],
                    self.data[rows[2] * d + c],
                    self.data[rows[3] * d + c],
                ];
                for i in 0..4 {
                    self.data[rows[i] * d + c] = u[4 * i] * v[0]
                        + u[4 * i + 1] * v[1]
                        + u[4 * i + 2] * v[2]
                        + u[4 * i + 3] * v[3];
                }
            }
        }
    }

    fn right_mul_dagger(&mut self, ba: usize, bb: usize, u: &Mat4<T>) {
        let d = self.dim();
        let (ma, mb) = (1 << ba, 1 << bb);
        let uc: Mat4<T> = u.map(|z| z.conj());
        for r in 0..d {
            let row = &mut self.data[r * d..(r + 1) * d];
            for c in 0..d {
                if c & (ma | mb) != 0 {
                    continue;
                }
                let cols = [c, c | mb, c | ma, c | ma | mb];
                let v = [row[cols[0]], row[cols[1]], row[cols[2]], row[cols[3]]];
                for i in 0..4 {
                    row[cols[i]] = v[0] * uc[4 * i]
                        + v[1] * uc[4 * i + 1]
                        + v[2] * uc[4 * i + 2]
                        + v[3] * uc[4 * i + 3];
                }
            }
        }
    }

    /// `rho -> sum_k K rho K^dagger`.
    pub fn apply_kraus(&mut self, a: usize, b: usize, kraus: &[Mat4<T>]) -> Result<()> {
        let (ba, bb) = (self.bit(a)?, self.bit(b)?);
        let mut acc = vec![czero(); self.data.len()];
        for k in kraus {
            let mut t = self.clone();
            t.left_mul(ba, bb, k);
            t.right_mul_dagger(ba, bb, k);
            for (x, y) in acc.iter_mut().zip(t.data.iter()) {
                *x += *y;
            }
        }
        self.data = acc;
        Ok(())
    }

    /// Two-qubit depolarizing channel:
    /// `rho -> (1-p) rho + p/15 sum_{P != II} P rho P`.
    pub fn depolarize2(&mut self, a: usize, b: usize, p: f64) -> Result<()> {
        check_p(p)?;
        if p == 0.0 {
            return Ok(());
        }
        let (ba, bb) = (self.bit(a)?, self.bit(b)?);
        // Equivalent to (1-q) rho + q (Tr_ab rho) (x) I/4 with q = 16p/15.
        let q = T::lit(16.0 * p / 15.0);
        let keep = T::one() - q;
        let quarter = q * T::lit(0.25);
        let d = self.dim();
        let (ma, mb) = (1 << ba, 1 << bb);
        for r in 0..d {
            if r & (ma | mb) != 0 {
                continue;
            }
            let rows = [r, r | mb, r | ma, r | ma | mb];
            for c in 0..d {
                if c & (ma | mb) != 0 {
                    continue;
                }
                let cols = [c, c | mb, c | ma, c | ma | mb];
                let mut t = czero();
                for i in 0..4 {
                    t += self.data[rows[i] * d + cols[i]];
                }
                for i in 0..4 {
                    for j in 0..4 {
                        self.data[rows[i] * d + cols[j]] *= keep;
                    }
                    self.data[rows[i] * d + cols[i]] += t * quarter;
                }
            }
        }
        Ok(())
    }

    /// Single-qubit depolarizing channel `rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)`.
    pub fn depolarize1(&mut self, a: usize, p: f64) -> Result<()> {
        check_p(p)?;
        if p == 0.0 {
            return Ok(());
        }
        let ba = self.bit(a)?;
        let q = T::lit(4.0 * p / 3.0);
        let keep = T::one() - q;
        let half = q * T::lit(0.5);
        let d = self.dim();
        let m = 1 << ba;
        for r in 0..d {
            if r & m != 0 {
                continue;
            }
            for c in 0..d {
                if c & m != 0 {
                    continue;
                }
                let (r1, c1) = (r | m, c | m);
                let t = self.data[r * d + c] + self.data[r1 * d + c1];
                self.data[r * d + c] = self.data[r * d + c] * keep + t * half;
                self.data[r1 * d + c1] = self.data[r1 * d + c1] * keep + t * half;
                self.data[r * d + c1] *= keep;
                self.data[r1 * d + c] *= keep;
            }
        }
        Ok(())
    }

    /// Traces out qubit `q`.
    pub fn discard(&mut self, q: usize) -> Result<()> {
        self.contract(q, &[cone(), czero(), czero(), cone()])
    }

    /// `O -> Tr_q[(sigma_q (x) I) O]`; with `sigma = I` this is the partial trace,
    /// with `sigma = |0><0|` it projects a Heisenberg operator onto a fresh ancilla.
    pub fn contract(&mut self, q: usize, sigma: &Mat2<T>) -> Result<()> {
        let pos = self.position(q)?;
        let bit = self.n_qubits() - 1 - pos;
        let d = self.dim();
        let nd = d / 2;
        let mut out = vec![czero(); nd * nd];
        for r in 0..nd {
            let r0 = insert_bit(r, bit, 0);
            let r1 = insert_bit(r, bit, 1);
            for c in 0..nd {
                let c0 = insert_bit(c, bit, 0);
                let c1 = insert_bit(c, bit, 1);
                out[r * nd + c] = sigma[0] * self.data[r0 * d + c0]
                    + sigma[2] * self.data[r0 * d + c1]
                    + sigma[1] * self.data[r1 * d + c0]
                    + sigma[3] * self.data[r1 * d + c1];
            }
        }
        self.data = out;
        self.qubits.remove(pos);
        Ok(())
    }

    /// Reset: trace out `q`, then re-prepare it as `|0><0|` depolarized at `prep_error`.
    pub fn reset(&mut self, q: usize, prep_error: f64) -> Result<()> {
        check_p(prep_error)?;
        self.discard(q)?;
        self.add_qubit(q, &noisy_zero(prep_error));
        Ok(())
    }

    /// Reduced state on `keep`, in that order.
    pub fn reduced(&self, keep: &[usize]) -> Result<Self> {
        let mut s = self.clone();
        for &q in self.qubits.iter() {
            if !keep.contains(&q) {
                s.discard(q)?;
            }
        }
        s.reorder(keep)
    }

    /// Reorders qubit positions to `order` (a permutation of the live ids).
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_qubits() {
            return Err(Error::DimensionMismatch(order.len(), self.n_qubits()));
        }
        let k = self.n_qubits();
        let src_bits: Vec<usize> = order
            .iter()
            .map(|&q| self.bit(q))
            .collect::<Result<_>>()?;
        let d = self.dim();
        let map = |x: usize| -> usize {
            let mut y = 0;
            for (j, &sb) in src_bits.iter().enumerate() {
                if x & (1 << (k - 1 - j)) != 0 {
                    y |= 1 << sb;
                }
            }
            y
        };
        let idx: Vec<usize> = (0..d).map(map).collect();
        let mut data = vec![czero(); d * d];
        for r in 0..d {
            for c in 0..d {
                data[r * d + c] = self.data[idx[r] * d + idx[c]];
            }
        }
        Ok(DensityMatrix {
            qubits: order.to_vec(),
            data,
        })
    }

    /// Max deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for r in 0..d {
            for c in 0..d {
                let e = modulus(self.data[r * d + c] - self.data[c * d + r].conj()).as_f64();
                m = m.max(e);
            }
        }
        m
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigenvalues(&self.data, self.dim())
    }

    /// Checks Hermiticity, positivity and unit trace to `tol`.
    pub fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        let h = self.hermiticity_defect();
        if h > tol {
            return Err(format!("asymmetry {h:e}"));
        }
        let t = self.trace();
        if (t.re.as_f64() - 1.0).abs() > tol || t.im.as_f64().abs() > tol {
            return Err(format!("trace {}+{}i", t.re.as_f64(), t.im.as_f64()));
        }
        let min = self
            .eigenvalues()
            .into_iter()
            .map(|x| x.as_f64())
            .fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(format!("eigenvalue {min:e}"));
        }
        Ok(())
    }

    pub fn scale(&mut self, f: T) {
        for z in self.data.iter_mut() {
            *z *= f;
        }
    }

    /// `self += f * other` (same qubit order required).
    pub fn add_scaled(&mut self, other: &Self, f: T) -> Result<()> {
        if self.qubits != other.qubits {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += *y * f;
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> DensityMatrix<U> {
        DensityMatrix {
            qubits: self.qubits.clone(),
            data: self
                .data
                .iter()
                .map(|z| C::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect(),
        }
    }
}

/// `1/2 * sum |eig(rho - sigma)|`.
pub fn trace_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let diff: Vec<C<T>> = rho
        .data
        .iter()
        .zip(sigma.data.iter())
        .map(|(a, b)| *a - *b)
        .collect();
    let ev = hermitian_eigenvalues(&diff, rho.dim());
    Ok(0.5 * ev.iter().map(|x| x.as_f64().abs()).sum::<f64>())
}

#[derive(Clone, Debug)]
pub struct StateVector<T: Real> {
    qubits: Vec<usize>,
    amps: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn empty() -> Self {
        StateVector {
            qubits: Vec::new(),
            amps: vec![cone()],
        }
    }

    pub fn zeros(qubits: &[usize]) -> Self {
        let mut s = Self::empty();
        for &q in qubits {
            s.add_qubit(q, Pauli::I);
        }
        s
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amps
    }

    pub fn position(&self, q: usize) -> Result<usize> {
        self.qubits
            .iter()
            .position(|&x| x == q)
            .ok_or(Error::DeadQubit(q))
    }

    fn bit(&self, q: usize) -> Result<usize> {
        Ok(self.n_qubits() - 1 - self.position(q)?)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| norm_sqr(*z).as_f64()).sum()
    }

    /// Appends qubit `q` as `P|0>` for a Pauli `P` (phases dropped).
    pub fn add_qubit(&mut self, q: usize, p: Pauli) {
        let one = p.x_bit();
        let mut out = vec![czero(); 2 * self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            out[2 * i + one as usize] = *a;
        }
        self.amps = out;
        self.qubits.push(q);
    }

    pub fn apply_unitary(&mut self, a: usize, b: usize, u: &Mat4<T>) -> Result<()> {
        let (ba, bb) = (self.bit(a)?, self.bit(b)?);
        let (ma, mb) = (1 << ba, 1 << bb);
        for r in 0..self.amps.len() {
            if r & (ma | mb) != 0 {
                continue;
            }
            let idx = [r, r | mb, r | ma, r | ma | mb];
            let v = [self.amps[idx[0]], self.amps[idx[1]], self.amps[idx[2]], self.amps[idx[3]]];
            for i in 0..4 {
                self.amps[idx[i]] =
                    u[4 * i] * v[0] + u[4 * i + 1] * v[1] + u[4 * i + 2] * v[2] + u[4 * i + 3] * v[3];
            }
        }
        Ok(())
    }

    /// Applies a single-qubit Pauli (global phases dropped).
    pub fn apply_pauli(&mut self, q: usize, p: Pauli) -> Result<()> {
        if p == Pauli::I {
            return Ok(());
        }
        let m = 1usize << self.bit(q)?;
        if p.x_bit() {
            for r in 0..self.amps.len() {
                if r & m == 0 {
                    self.amps.swap(r, r | m);
                }
            }
        }
        if p.z_bit() {
            for (r, a) in self.amps.iter_mut().enumerate() {
                if r & m != 0 {
                    *a = -*a;
                }
            }
        }
        Ok(())
    }

    /// Probability of outcome 1 in a Z measurement of `q`.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        let m = 1usize << self.bit(q)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(r, _)| r & m != 0)
            .map(|(_, a)| norm_sqr(*a).as_f64())
            .sum())
    }

    /// Projects `q` onto `outcome` without renormalizing and removes it.
    pub fn project_out(&mut self, q: usize, outcome: usize) -> Result<()> {
        let pos = self.position(q)?;
        let bit = self.n_qubits() - 1 - pos;
        let nd = self.amps.len() / 2;
        let out: Vec<C<T>> = (0..nd)
            .map(|r| self.amps[insert_bit(r, bit, outcome)])
            .collect();
        self.amps = out;
        self.qubits.remove(pos);
        Ok(())
    }

    pub fn scale(&mut self, f: T) {
        for a in self.amps.iter_mut() {
            *a *= f;
        }
    }

    /// Samples a Z measurement on `q`, collapses, renormalizes and removes the qubit.
    pub fn measure_out<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<usize> {
        let p1 = self.prob_one(q)? / self.norm_sqr();
        let outcome = (rng.random::<f64>() < p1) as usize;
        self.project_out(q, outcome)?;
        let n = self.norm_sqr();
        if n > 0.0 {
            self.scale(T::lit(1.0 / n.sqrt()));
        }
        Ok(outcome)
    }

    /// Reduced density matrix on `keep` (in that order), tracing out the rest.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix<T>> {
        let k = self.n_qubits();
        let kb: Vec<usize> = keep.iter().map(|&q| self.bit(q)).collect::<Result<_>>()?;
        let keep_mask: usize = kb.iter().map(|b| 1usize << b).sum();
        let dk = 1usize << keep.len();
        let rest_bits: Vec<usize> = (0..k).filter(|b| keep_mask & (1 << b) == 0).collect();
        let scatter_rest = |e: usize| -> usize {
            let mut y = 0;
            for (j, &b) in rest_bits.iter().enumerate() {
                if e & (1 << j) != 0 {
                    y |= 1 << b;
                }
            }
            y
        };
        let scatter_keep = |x: usize| -> usize {
            let mut y = 0;
            for (j, &b) in kb.iter().enumerate() {
                if x & (1 << (keep.len() - 1 - j)) != 0 {
                    y |= 1 << b;
                }
            }
            y
        };
        let keep_idx: Vec<usize> = (0..dk).map(scatter_keep).collect();
        let mut data = vec![czero::<T>(); dk * dk];
        for e in 0..(1usize << rest_bits.len()) {
            let base = scatter_rest(e);
            for r in 0..dk {
                let ar = self.amps[base | keep_idx[r]];
                if ar == czero() {
                    continue;
                }
                for c in 0..dk {
                    data[r * dk + c] += ar * self.amps[base | keep_idx[c]].conj();
                }
            }
        }
        DensityMatrix::from_data(keep.to_vec(), data)
    }
}

/// Either representation, for callers that switch engines at run time.
#[derive(Clone, Debug)]
pub enum QuantumState<T: Real> {
    Density(DensityMatrix<T>),
    Vector(StateVector<T>),
}

impl<T: Real> QuantumState<T> {
    pub fn live_qubits(&self) -> &[usize] {
        match self {
            QuantumState::Density(d) => d.qubits(),
            QuantumState::Vector(v) => v.qubits(),
        }
    }

    pub fn apply_gate(&mut self, a: usize, b: usize, u: &Mat4<T>) -> Result<()> {
        match self {
            QuantumState::Density(d) => d.apply_unitary(a, b, u),
            QuantumState::Vector(v) => v.apply_unitary(a, b, u),
        }
    }

    pub fn depolarize(&mut self, a: usize, b: usize, p: f64) -> Result<()> {
        match self {
            QuantumState::Density(d) => d.depolarize2(a, b, p),
            QuantumState::Vector(_) => Err(Error::RequiresDensityMatrix),
        }
    }

    pub fn reset(&mut self, qubits: &[usize], prep_error: f64) -> Result<()> {
        match self {
            QuantumState::Density(d) => {
                for &q in qubits {
                    d.reset(q, prep_error)?;
                }
                Ok(())
            }
            QuantumState::Vector(_) => Err(Error::RequiresDensityMatrix),
        }
    }

    /// Density matrix of the whole live register.
    pub fn density(&self) -> Result<DensityMatrix<T>> {
        match self {
            QuantumState::Density(d) => Ok(d.clone()),
            QuantumState::Vector(v) => v.reduced(v.qubits()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cast4, dagger4, haar_su, from_dmatrix4};
    use crate::pauli::two_qubit_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dm(n: usize, seed: u64) -> DensityMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<usize> = (0..n).collect();
        let mut s = DensityMatrix::zeros(&ids);
        for _ in 0..3 {
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        let u = from_dmatrix4(&haar_su(4, &mut rng));
                        s.apply_unitary(a, b, &u).unwrap();
                        s.depolarize2(a, b, 0.1).unwrap();
                    }
                }
            }
        }
        s
    }

    fn max_diff(a: &DensityMatrix<f64>, b: &DensityMatrix<f64>) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn x_on_first_qubit_flips_high_bit() {
        let mut s = StateVector::<f64>::zeros(&[7, 9]);
        let xi = two_qubit_matrix::<f64>(4);
        s.apply_unitary(7, 9, &xi).unwrap();
        assert!((s.amplitudes()[2].re - 1.0).abs() < 1e-15);
        let mut d = DensityMatrix::<f64>::zeros(&[7, 9]);
        d.apply_unitary(7, 9, &xi).unwrap();
        assert!((d.get(2, 2).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unitary_then_inverse_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s0 = random_dm(3, 1);
        let mut s = s0.clone();
        let u = from_dmatrix4(&haar_su(4, &mut rng));
        s.apply_unitary(2, 0, &u).unwrap();
        s.apply_unitary(2, 0, &dagger4(&u)).unwrap();
        assert!(max_diff(&s, &s0) < 1e-12);
    }

    #[test]
    fn depolarize_matches_pauli_sum() {
        let s0 = random_dm(3, 4);
        let p = 0.37;
        let mut fast = s0.clone();
        fast.depolarize2(0, 2, p).unwrap();
        let mut slow = s0.clone();
        slow.scale(1.0 - p);
        for k in 1..16 {
            let mut t = s0.clone();
            t.apply_unitary(0, 2, &two_qubit_matrix(k)).unwrap();
            slow.add_scaled(&t, p / 15.0).unwrap();
        }
        assert!(max_diff(&fast, &slow) < 1e-14);
    }

    #[test]
    fn depolarize_on_00() {
        let p = 0.2;
        let mut s = DensityMatrix::<f64>::zeros(&[0, 1]);
        s.depolarize2(0, 1, p).unwrap();
        assert!((s.get(0, 0).re - (1.0 - 0.8 * p)).abs() < 1e-15);
        assert!(matches!(s.depolarize2(0, 1, 1.5), Err(Error::InvalidProbability(_))));
    }

    #[test]
    fn single_qubit_depolarize_matches_pauli_sum() {
        let s0 = random_dm(2, 8);
        let p = 0.3;
        let mut fast = s0.clone();
        fast.depolarize1(1, p).unwrap();
        let mut slow = s0.clone();
        slow.scale(1.0 - p);
        for k in [1usize, 2, 3] {
            let mut t = s0.clone();
            t.apply_unitary(0, 1, &two_qubit_matrix(k)).unwrap();
            slow.add_scaled(&t, p / 3.0).unwrap();
        }
        assert!(max_diff(&fast, &slow) < 1e-14);
    }

    #[test]
    fn reset_prepares_noisy_zero() {
        let mut s = random_dm(2, 3);
        s.reset(0, 0.0).unwrap();
        let r = s.reduced(&[0]).unwrap();
        assert!((r.get(0, 0).re - 1.0).abs() < 1e-14);
        s.reset(1, 0.15).unwrap();
        let r = s.reduced(&[1]).unwrap();
        assert!((r.get(0, 0).re - 0.9).abs() < 1e-14);
        let mut again = s.clone();
        again.reset(1, 0.15).unwrap();
        assert!(max_diff(&again, &s) < 1e-14);
    }

    #[test]
    fn reduced_state_agrees_between_representations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ids = [4usize, 1, 6, 3];
        let mut sv = StateVector::<f64>::zeros(&ids);
        let mut dm = DensityMatrix::<f64>::zeros(&ids);
        for (a, b) in [(4, 1), (6, 3), (1, 6), (3, 4)] {
            let u = from_dmatrix4(&haar_su(4, &mut rng));
            sv.apply_unitary(a, b, &u).unwrap();
            dm.apply_unitary(a, b, &u).unwrap();
        }
        let r1 = sv.reduced(&[6, 4]).unwrap();
        let r2 = dm.reduced(&[6, 4]).unwrap();
        assert!(max_diff(&r1, &r2) < 1e-13);
        r1.validate(1e-12).unwrap();
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::<f64>::zeros(&[0]);
        assert!(trace_distance(&a, &a.clone()).unwrap() < 1e-15);
        let one = DensityMatrix::from_pure(vec![0], &[C::new(0.0, 0.0), C::new(1.0, 0.0)]).unwrap();
        assert!((trace_distance(&a, &one).unwrap() - 1.0).abs() < 1e-14);
        let mut dep = a.clone();
        dep.depolarize1(0, 0.3).unwrap();
        assert!((trace_distance(&a, &dep).unwrap() - 0.2).abs() < 1e-14);
        let two = DensityMatrix::<f64>::zeros(&[0, 1]);
        assert!(trace_distance(&a, &two).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = cast4::<f32>(&from_dmatrix4(&haar_su(4, &mut rng)));
        let mut s = DensityMatrix::<f32>::zeros(&[0, 1]);
        s.apply_unitary(0, 1, &u).unwrap();
        s.depolarize2(0, 1, 0.1).unwrap();
        assert!(s.validate(1e-5).is_ok());
    }

    #[test]
    fn reorder_swaps_positions() {
        let s = random_dm(3, 12);
        let r = s.reorder(&[2, 0, 1]).unwrap();
        let back = r.reorder(&[0, 1, 2]).unwrap();
        assert!(max_diff(&back, &s) < 1e-15);
        let a = s.reduced(&[2, 0]).unwrap();
        let b = r.reduced(&[2, 0]).unwrap();
        assert!(max_diff(&a, &b) < 1e-15);
    }
}
