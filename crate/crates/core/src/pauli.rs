//! Single-qubit Pauli letters and weighted Pauli strings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{c, czero, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i & 3]
    }

    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }

    /// X component of the symplectic representation.
    #[inline]
    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Z component of the symplectic representation.
    #[inline]
    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Y | Pauli::Z)
    }

    /// Row-major 2x2 matrix.
    pub fn matrix<T: Real>(self) -> [C<T>; 4] {
        let o = czero::<T>();
        match self {
            Pauli::I => [c(1.0, 0.0), o, o, c(1.0, 0.0)],
            Pauli::X => [o, c(1.0, 0.0), c(1.0, 0.0), o],
            Pauli::Y => [o, c(0.0, -1.0), c(0.0, 1.0), o],
            Pauli::Z => [c(1.0, 0.0), o, o, c(-1.0, 0.0)],
        }
    }

    /// Product `self * other = i^k * P`; returns `(k mod 4, P)`.
    pub fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn commutes(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// The two letters of the k-th two-qubit Pauli, `k = 4a + b` over `{I,X,Y,Z}^2`.
/// Index 0 is the identity; generators use `k = 1..16`.
pub fn two_qubit_pauli(k: usize) -> (Pauli, Pauli) {
    (Pauli::from_index(k / 4), Pauli::from_index(k % 4))
}

/// Row-major 4x4 matrix of the k-th two-qubit Pauli (first letter acts on the high bit).
pub fn two_qubit_matrix<T: Real>(k: usize) -> [C<T>; 16] {
    let (a, b) = two_qubit_pauli(k);
    kron2(&a.matrix::<T>(), &b.matrix::<T>())
}

pub(crate) fn kron2<T: Real>(a: &[C<T>; 4], b: &[C<T>; 4]) -> [C<T>; 16] {
    let mut out = [czero::<T>(); 16];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k) * 4 + 2 * j + l] = a[2 * i + j] * b[2 * k + l];
                }
            }
        }
    }
    out
}

/// Real-weighted tensor product of Pauli letters on lattice sites.
///
/// Identity letters are never stored, so an empty map is the identity term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub coeff: f64,
    pub letters: BTreeMap<usize, Pauli>,
}

impl PauliString {
    pub fn new<I: IntoIterator<Item = (usize, Pauli)>>(coeff: f64, letters: I) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(Error::NonHermitian(format!("coefficient {coeff}")));
        }
        let mut map = BTreeMap::new();
        for (site, p) in letters {
            if p == Pauli::I {
                continue;
            }
            if map.insert(site, p).is_some() {
                return Err(Error::InvalidSpec(format!("site {site} repeated in Pauli string")));
            }
        }
        Ok(PauliString { coeff, letters: map })
    }

    pub fn identity(coeff: f64) -> Self {
        PauliString {
            coeff,
            letters: BTreeMap::new(),
        }
    }

    /// Convenience constructor for `coeff * P_{site}`.
    pub fn single(coeff: f64, site: usize, p: Pauli) -> Self {
        PauliString::new(coeff, [(site, p)]).expect("single letter")
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn letter(&self, site: usize) -> Pauli {
        self.letters.get(&site).copied().unwrap_or(Pauli::I)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.letters.keys().copied()
    }

    /// Two Pauli strings commute iff they anticommute on an even number of sites.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .letters
            .iter()
            .filter(|(s, p)| !p.commutes(other.letter(**s)))
            .count();
        anti % 2 == 0
    }

    /// Product of the letter parts, ignoring coefficients: `self * other = i^k * P`.
    pub fn product(&self, other: &PauliString) -> (u8, PauliString) {
        let mut phase = 0u8;
        let mut letters = self.letters.clone();
        for (&site, &q) in &other.letters {
            let p = self.letter(site);
            let (k, r) = p.mul(q);
            phase = (phase + k) % 4;
            if r == Pauli::I {
                letters.remove(&site);
            } else {
                letters.insert(site, r);
            }
        }
        (phase, PauliString { coeff: 1.0, letters })
    }

    /// Same letters, ignoring the coefficient.
    pub fn same_letters(&self, other: &PauliString) -> bool {
        self.letters == other.letters
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        for (s, p) in &self.letters {
            write!(f, " {s}:{p}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: &[C<f64>; 4], b: &[C<f64>; 4]) -> [C<f64>; 4] {
        let mut o = [czero(); 4];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    o[2 * i + j] += a[2 * i + k] * b[2 * k + j];
                }
            }
        }
        o
    }

    #[test]
    fn letter_products_match_matrices() {
        let phases = [
            C::new(1.0, 0.0),
            C::new(0.0, 1.0),
            C::new(-1.0, 0.0),
            C::new(0.0, -1.0),
        ];
        for a in Pauli::ALL {
            for b in Pauli::ALL {
                let (k, p) = a.mul(b);
                let lhs = mat_mul(&a.matrix(), &b.matrix());
                let rhs = p.matrix::<f64>().map(|z| z * phases[k as usize]);
                for (x, y) in lhs.iter().zip(rhs.iter()) {
                    assert!((x - y).norm() < 1e-15, "{a}{b}");
                }
            }
        }
    }

    #[test]
    fn commutation_counts_anticommuting_sites() {
        let xx = PauliString::new(1.0, [(0, Pauli::X), (1, Pauli::X)]).unwrap();
        let zz = PauliString::new(1.0, [(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        let zi = PauliString::single(1.0, 0, Pauli::Z);
        assert!(xx.commutes_with(&zz));
        assert!(!xx.commutes_with(&zi));
        assert!(zz.commutes_with(&zi));
    }

    #[test]
    fn identity_letters_are_dropped() {
        let p = PauliString::new(2.0, [(0, Pauli::I), (3, Pauli::Y)]).unwrap();
        assert_eq!(p.weight(), 1);
        assert_eq!(p.letter(0), Pauli::I);
        assert!(PauliString::new(1.0, [(1, Pauli::X), (1, Pauli::Z)]).is_err());
    }

    #[test]
    fn two_qubit_index_order() {
        assert_eq!(two_qubit_pauli(0), (Pauli::I, Pauli::I));
        assert_eq!(two_qubit_pauli(1), (Pauli::I, Pauli::X));
        assert_eq!(two_qubit_pauli(5), (Pauli::X, Pauli::X));
        assert_eq!(two_qubit_pauli(15), (Pauli::Z, Pauli::Z));
        let zi = two_qubit_matrix::<f64>(12);
        assert_eq!(zi[0].re, 1.0);
        assert_eq!(zi[15].re, -1.0);
        assert_eq!(zi[2 * 4 + 2].re, -1.0);
    }
}
