use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString};
use crate::scalar::{czero, Real, C};

/// Masks and phase data of a Pauli string restricted to a register whose
/// positions carry the lattice sites `sites`.
fn masks(term: &PauliString, sites: &[usize]) -> Result<(usize, Vec<(usize, Pauli)>)> {
    let k = sites.len();
    let mut x = 0usize;
    let mut letters = Vec::new();
    for (&site, &p) in &term.letters {
        let pos = sites
            .iter()
            .position(|&s| s == site)
            .ok_or(Error::SupportOutsideTarget(site))?;
        let bit = k - 1 - pos;
        if p.x_bit() {
            x |= 1 << bit;
        }
        letters.push((bit, p));
    }
    Ok((x, letters))
}

/// `Tr(rho P)` for one Pauli string (coefficient ignored).
fn pauli_trace<T: Real>(rho: &DensityMatrix<T>, x: usize, letters: &[(usize, Pauli)]) -> C<T> {
    let d = rho.dim();
    let mut acc = czero::<T>();
    for c in 0..d {
        // P[c, c^x] * rho[c^x, c]
        let mut ph = C::new(T::one(), T::zero());
        for &(bit, p) in letters {
            let set = c & (1 << bit) != 0;
            match p {
                Pauli::Z if set => ph = -ph,
                Pauli::Y if set => ph = C::new(-ph.im, ph.re),
                Pauli::Y => ph = C::new(ph.im, -ph.re),
                _ => {}
            }
        }
        acc += ph * rho.get(c ^ x, c);
    }
    acc
}

/// `sum_terms coeff * Tr(rho P)`, where position `j` of `rho` carries lattice
/// site `sites[j]`.
pub fn expectation<T: Real>(
    rho: &DensityMatrix<T>,
    sites: &[usize],
    terms: &[PauliString],
) -> Result<f64> {
    if sites.len() != rho.n_qubits() {
        return Err(Error::DimensionMismatch(sites.len(), rho.n_qubits()));
    }
    let mut total = 0.0;
    for t in terms {
        let (x, letters) = masks(t, sites)?;
        total += t.coeff * pauli_trace(rho, x, &letters).re.as_f64();
    }
    Ok(total)
}

/// Dense row-major matrix of a Pauli string on `sites` (first site most significant).
pub fn pauli_matrix(term: &PauliString, sites: &[usize]) -> Result<Vec<C<f64>>> {
    let (x, letters) = masks(term, sites)?;
    let d = 1usize << sites.len();
    let mut m = vec![C::new(0.0, 0.0); d * d];
    for c in 0..d {
        let mut ph = C::new(term.coeff, 0.0);
        for &(bit, p) in &letters {
            let set = c & (1 << bit) != 0;
            match p {
                Pauli::Z if set => ph = -ph,
                Pauli::Y if set => ph *= C::new(0.0, 1.0),
                Pauli::Y => ph *= C::new(0.0, -1.0),
                _ => {}
            }
        }
        m[c * d + (c ^ x)] = ph;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Estimates an observable from `n_shots` measurements of every Pauli term.
pub fn sample_shots<T: Real>(
    rho: &DensityMatrix<T>,
    sites: &[usize],
    terms: &[PauliString],
    n_shots: u64,
    seed: u64,
) -> Result<ShotEstimate> {
    if n_shots == 0 {
        return Err(Error::InvalidSpec("n_shots must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_shots as f64;
    let mut mean = 0.0;
    let mut var = 0.0;
    for t in terms {
        if t.is_identity() {
            mean += t.coeff;
            continue;
        }
        let e = expectation(rho, sites, std::slice::from_ref(t))? / t.coeff;
        let p_plus = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
        let k = Binomial::new(n_shots, p_plus)
            .map_err(|_| Error::InvalidProbability(p_plus))?
            .sample(&mut rng) as f64;
        let est = 2.0 * k / n - 1.0;
        let sample_var = if n_shots > 1 {
            4.0 * k * (n - k) / (n * (n - 1.0))
        } else {
            0.0
        };
        mean += t.coeff * est;
        var += t.coeff * t.coeff * sample_var / n;
    }
    Ok(ShotEstimate {
        mean,
        stderr: var.sqrt(),
    })
}
