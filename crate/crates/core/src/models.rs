//! Benchmark Hamiltonians as Pauli sums, with exact ground-energy oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};

/// Largest register accepted by [`exact_ground_energy`].
pub const ED_LIMIT: usize = 16;
/// Up to this size the dense solver is used.
pub const DENSE_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Lattice {
    Chain { length: usize, periodic: bool },
    Hubbard { lx: usize, ly: usize },
    Generic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    pub n_qubits: usize,
    pub lattice: Lattice,
    pub terms: Vec<PauliString>,
}

impl PauliHamiltonian {
    pub fn new(n_qubits: usize, lattice: Lattice, terms: Vec<PauliString>) -> Result<Self> {
        for t in &terms {
            if let Some(site) = t.support().find(|&s| s >= n_qubits) {
                return Err(Error::SiteOutOfRange { site, size: n_qubits });
            }
        }
        Ok(PauliHamiltonian {
            n_qubits,
            lattice,
            terms,
        })
    }

    pub fn max_weight(&self) -> usize {
        self.terms.iter().map(PauliString::weight).max().unwrap_or(0)
    }

    /// One term per line: `coeff site:letter ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format!("{:?}", t.coeff));
            for (s, p) in &t.letters {
                out.push_str(&format!(" {s}:{p}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. Blank lines and `#`
    /// comments are skipped; complex coefficients are rejected.
    pub fn from_text(text: &str, n_qubits: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let mut fields = line.split_whitespace();
            let c = fields.next().unwrap_or_default();
            if c.contains(['i', 'j']) && c.parse::<f64>().is_err() {
                return Err(Error::NonHermitian(format!("line {}: coefficient {c}", i + 1)));
            }
            let coeff: f64 = c.parse().map_err(|_| parse_err(format!("bad coefficient {c:?}")))?;
            let mut letters = Vec::new();
            for f in fields {
                let (s, p) = f
                    .split_once(':')
                    .ok_or_else(|| parse_err(format!("expected site:letter, got {f:?}")))?;
                let site: usize = s.parse().map_err(|_| parse_err(format!("bad site {s:?}")))?;
                let mut chars = p.chars();
                let letter = match (chars.next().and_then(Pauli::from_char), chars.next()) {
                    (Some(l), None) => l,
                    _ => return Err(parse_err(format!("bad Pauli letter {p:?}"))),
                };
                letters.push((site, letter));
            }
            let term = PauliString::new(coeff, letters).map_err(|e| parse_err(e.to_string()))?;
            terms.push(term);
        }
        PauliHamiltonian::new(n_qubits, Lattice::Generic, terms)
    }

    /// `H |psi>` with qubit `q` as bit `n - 1 - q` of the basis index.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let n = self.n_qubits;
        for t in &self.terms {
            let (mut xm, mut zm, mut ny) = (0usize, 0usize, 0u32);
            for (&s, &p) in &t.letters {
                let bit = 1usize << (n - 1 - s);
                if p.x_bit() {
                    xm |= bit;
                }
                if p.z_bit() {
                    zm |= bit;
                }
                if p == Pauli::Y {
                    ny += 1;
                }
            }
            let base = Complex64::new(0.0, 1.0).powu(ny) * t.coeff;
            for (b, &amp) in psi.iter().enumerate() {
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let sign = if (b & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                out[b ^ xm] += base * amp * sign;
            }
        }
    }

    /// Dense matrix of the sum.
    pub fn dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > ED_LIMIT {
            return Err(Error::TooLarge(self.n_qubits));
        }
        let d = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![Complex64::new(0.0, 0.0); d];
        let mut col = vec![Complex64::new(0.0, 0.0); d];
        for c in 0..d {
            e[c] = Complex64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for r in 0..d {
                m[(r, c)] = col[r];
            }
            e[c] = Complex64::new(0.0, 0.0);
        }
        Ok(m)
    }
}

/// `-sum X_i X_{i+1} - g sum Z_i` on a chain of `length` sites.
pub fn tfim(length: usize, g: f64, periodic: bool) -> Result<PauliHamiltonian> {
    if length < 2 {
        return Err(Error::InvalidSpec(format!("chain length {length} < 2")));
    }
    let bonds = if periodic && length > 2 { length } else { length - 1 };
    let mut terms = Vec::with_capacity(bonds + length);
    for i in 0..bonds {
        terms.push(PauliString::new(-1.0, [(i, Pauli::X), ((i + 1) % length, Pauli::X)])?);
    }
    for i in 0..length {
        terms.push(PauliString::single(-g, i, Pauli::Z));
    }
    PauliHamiltonian::new(length, Lattice::Chain { length, periodic }, terms)
}

/// Single-particle energies of `-sum_r (a+_{r+1} a_r + h.c.)`.
pub fn hopping_spectrum(length: usize, periodic: bool) -> Vec<f64> {
    let mut h = DMatrix::<f64>::zeros(length, length);
    let bonds = if periodic && length > 2 { length } else { length - 1 };
    for r in 0..bonds {
        let s = (r + 1) % length;
        h[(r, s)] -= 1.0;
        h[(s, r)] -= 1.0;
    }
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Free-fermion ground energy: sum of the negative single-particle energies.
pub fn ff_ground_energy(length: usize, periodic: bool) -> Result<f64> {
    if length < 2 {
        return Err(Error::InvalidSpec(format!("chain length {length} < 2")));
    }
    // Levels within rounding of zero are empty or filled at no cost.
    Ok(hopping_spectrum(length, periodic)
        .into_iter()
        .filter(|&e| e < -1e-12)
        .sum())
}

/// Periodic free-fermion ground energy from the momentum sum.
pub fn ff_ground_energy_momentum(length: usize) -> f64 {
    (0..length)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / length as f64).cos())
        .filter(|&c| c > 1e-12)
        .map(|c| -2.0 * c)
        .sum()
}

/// Lowest eigenvalue: dense up to [`DENSE_LIMIT`] qubits, Lanczos beyond.
pub fn exact_ground_energy(h: &PauliHamiltonian) -> Result<f64> {
    if h.n_qubits > ED_LIMIT {
        return Err(Error::TooLarge(h.n_qubits));
    }
    if h.n_qubits <= DENSE_LIMIT {
        dense_ground_energy(h)
    } else {
        lanczos_ground_energy(h, 1e-10, 0)
    }
}

pub fn dense_ground_energy(h: &PauliHamiltonian) -> Result<f64> {
    let m = h.dense()?;
    let herm = (&m - m.adjoint()).camax();
    if herm > 1e-12 {
        return Err(Error::NonHermitian(format!("dense defect {herm:e}")));
    }
    Ok(m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

/// Restarted Lanczos with full reorthogonalization inside each cycle.
/// Stops when the Ritz residual falls below `tol`.
pub fn lanczos_ground_energy(h: &PauliHamiltonian, tol: f64, seed: u64) -> Result<f64> {
    const CYCLE: usize = 60;
    const MAX_RESTARTS: usize = 200;
    if h.n_qubits > ED_LIMIT {
        return Err(Error::TooLarge(h.n_qubits));
    }
    let d = 1usize << h.n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..d)
        .map(|_| {
            Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    normalize(&mut v);
    let mut w = vec![Complex64::new(0.0, 0.0); d];
    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<Complex64>> = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..CYCLE.min(d) {
            h.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let nb = norm(&w);
            if nb < 1e-14 || j + 1 == CYCLE.min(d) {
                break;
            }
            beta.push(nb);
            basis.push(w.iter().map(|z| z / nb).collect());
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(Error::NoConvergence)?;
        let y: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
        let mut ritz = vec![Complex64::new(0.0, 0.0); d];
        for (i, b) in basis.iter().take(k).enumerate() {
            ritz.iter_mut().zip(b).for_each(|(x, z)| *x += z * y[i]);
        }
        normalize(&mut ritz);
        h.apply(&ritz, &mut w);
        let e = dot(&ritz, &w).re;
        let resid = w
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - b * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid < tol || k < CYCLE.min(d) {
            return Ok(theta.min(e));
        }
        v = ritz;
    }
    Err(Error::NoConvergence)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [Complex64]) {
    let n = norm(a);
    a.iter_mut().for_each(|z| *z /= n);
}

/// Couplings of the spin model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubbardParams {
    pub t: f64,
    pub u: f64,
    /// Weight of the constraint terms; the mapping fixes their operators
    /// but not their strength.
    pub penalty: f64,
}

/// Qubit of site `(x, y)` (1-based), spin `sigma` (0 up, 1 down) and
/// copy `j` in `{1, 2}`.
pub fn hubbard_qubit(lx: usize, x: usize, y: usize, sigma: usize, j: usize) -> usize {
    ((((y - 1) * lx + (x - 1)) * 2 + sigma) * 2) + (j - 1)
}

/// Spin form of the nearest-neighbour Fermi-Hubbard model on an open
/// `lx x ly` lattice, with two qubits per fermion mode.
pub fn hubbard_vc_terms(lx: usize, ly: usize, p: HubbardParams) -> Result<PauliHamiltonian> {
    use Pauli::{X, Y, Z};
    if lx < 2 || ly < 2 {
        return Err(Error::InvalidSpec(format!("lattice {lx}x{ly} needs both sides >= 2")));
    }
    let q = |x: usize, y: usize, s: usize, j: usize| hubbard_qubit(lx, x, y, s, j);
    let mut terms = Vec::new();
    for y in 1..=ly {
        for x in 1..=lx {
            for s in 0..2 {
                if x < lx {
                    let (i, k) = ((x, y), (x + 1, y));
                    for a in [X, Y] {
                        terms.push(PauliString::new(
                            -p.t,
                            [(q(i.0, i.1, s, 1), a), (q(k.0, k.1, s, 1), a), (q(i.0, i.1, s, 2), Z)],
                        )?);
                    }
                }
                if y < ly {
                    let (i, k) = ((x, y), (x, y + 1));
                    let sign = if y % 2 == 1 { -1.0 } else { 1.0 };
                    let (ai, ak) = if x % 2 == 1 { (X, Y) } else { (Y, X) };
                    for a in [X, Y] {
                        terms.push(PauliString::new(
                            sign * p.t,
                            [
                                (q(i.0, i.1, s, 1), a),
                                (q(k.0, k.1, s, 1), a),
                                (q(i.0, i.1, s, 2), ai),
                                (q(k.0, k.1, s, 2), ak),
                            ],
                        )?);
                    }
                }
            }
            // U (Z_up - 1)(Z_down - 1).
            let (zu, zd) = (q(x, y, 0, 1), q(x, y, 1, 1));
            terms.push(PauliString::new(p.u, [(zu, Z), (zd, Z)])?);
            terms.push(PauliString::single(-p.u, zu, Z));
            terms.push(PauliString::single(-p.u, zd, Z));
            terms.push(PauliString::identity(p.u));
        }
    }
    for y in 1..ly {
        for x in 1..lx {
            let letter = if y % 2 == 1 { Y } else { X };
            let zs = if x % 2 == 1 {
                [(x + 1, y), (x, y + 1)]
            } else {
                [(x, y), (x + 1, y + 1)]
            };
            for s in 0..2 {
                let mut letters = vec![(q(zs[0].0, zs[0].1, s, 1), Z), (q(zs[1].0, zs[1].1, s, 1), Z)];
                for (cx, cy) in [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)] {
                    letters.push((q(cx, cy, s, 2), letter));
                }
                terms.push(PauliString::new(p.penalty, letters)?);
            }
        }
    }
    PauliHamiltonian::new(4 * lx * ly, Lattice::Hubbard { lx, ly }, terms)
}

/// Random Hamiltonian of `n_terms` Pauli strings on `n_qubits`, for tests
/// and benchmarks.
pub fn random_pauli_hamiltonian(n_qubits: usize, n_terms: usize, seed: u64) -> Result<PauliHamiltonian> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (0..n_terms)
        .map(|_| {
            let letters: Vec<(usize, Pauli)> = (0..n_qubits)
                .map(|s| (s, Pauli::from_index(rng.random_range(0..4))))
                .collect();
            PauliString::new(rng.random_range(-1.0..1.0), letters)
        })
        .collect::<Result<Vec<_>>>()?;
    PauliHamiltonian::new(n_qubits, Lattice::Generic, terms)
}
