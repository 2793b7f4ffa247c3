//! Dictionaries: `n x K` matrices with unit-norm columns (atoms).

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, normalize, Mat};
use crate::rng::{gaussian_vector, random_unit_vector, stream_rng, Stream};

const UNIT_TOL: f64 = 1e-10;

/// Atoms are stored contiguously, atom `k` at `atoms[k*n .. (k+1)*n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    n: usize,
    k: usize,
    atoms: Vec<f64>,
}

impl Dictionary {
    /// Validates that every atom is finite and unit-norm to 1e-10.
    pub fn new(n: usize, k: usize, atoms: Vec<f64>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidDictionary(format!(
                "empty dictionary {n}x{k}"
            )));
        }
        if atoms.len() != n * k {
            return Err(Error::InvalidDictionary(format!(
                "expected {} entries, got {}",
                n * k,
                atoms.len()
            )));
        }
        for (j, a) in atoms.chunks_exact(n).enumerate() {
            let norm = norm2(a);
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::InvalidDictionary(format!(
                    "atom {j} is zero or non-finite"
                )));
            }
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidDictionary(format!(
                    "atom {j} has norm {norm}"
                )));
            }
        }
        Ok(Dictionary { n, k, atoms })
    }

    pub fn from_atoms(atoms: &[Vec<f64>]) -> Result<Self> {
        let n = atoms.first().map_or(0, Vec::len);
        if atoms.iter().any(|a| a.len() != n) {
            return Err(Error::InvalidDictionary("atoms differ in length".into()));
        }
        Dictionary::new(n, atoms.len(), atoms.concat())
    }

    /// Normalizes each column of `m`; a zero column is rejected.
    pub fn from_columns_normalized(m: &Mat) -> Result<Self> {
        let mut atoms = Vec::with_capacity(m.rows() * m.cols());
        for (j, mut c) in m.columns().enumerate() {
            if normalize(&mut c) == 0.0 {
                return Err(Error::InvalidDictionary(format!("atom {j} is zero")));
            }
            atoms.extend(c);
        }
        Dictionary::new(m.rows(), m.cols(), atoms)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n..(j + 1) * self.n]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.n)
    }

    /// Replaces atom `j`. The caller guarantees `atom` is unit-norm.
    pub fn set_atom(&mut self, j: usize, atom: &[f64]) {
        debug_assert!((norm2(atom) - 1.0).abs() <= 1e-8);
        self.atoms[j * self.n..(j + 1) * self.n].copy_from_slice(atom);
    }

    /// `D^T y`.
    pub fn correlations(&self, y: &[f64]) -> Vec<f64> {
        self.atoms().map(|a| dot(a, y)).collect()
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_fn(self.n, self.k, |i, j| self.atoms[j * self.n + i])
    }

    /// Dictionaries placed side by side, atoms in order.
    pub fn concat(parts: &[&Dictionary]) -> Result<Self> {
        let n = parts.first().map_or(0, |d| d.n);
        if parts.iter().any(|d| d.n != n) {
            return Err(Error::InvalidDictionary("dimensions differ".into()));
        }
        let atoms: Vec<f64> = parts.iter().flat_map(|d| d.atoms.iter().copied()).collect();
        Dictionary::new(n, atoms.len() / n.max(1), atoms)
    }

    pub fn max_norm_deviation(&self) -> f64 {
        self.atoms()
            .map(|a| (norm2(a) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Random dictionary with i.i.d. standard normal entries, columns normalized.
pub fn init_dictionary(n: usize, k: usize, seed: u64) -> Dictionary {
    let mut rng = stream_rng(seed, Stream::DictionaryInit);
    let mut atoms = Vec::with_capacity(n * k);
    for _ in 0..k {
        atoms.extend(random_unit_vector(&mut rng, n));
    }
    Dictionary { n, k, atoms }
}

/// Reference direction used to fix atom signs; shared by every learner
/// seeded with `seed`.
pub fn reference_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Reference);
    let mut v = gaussian_vector(&mut rng, n);
    while normalize(&mut v) == 0.0 {
        v = gaussian_vector(&mut rng, n);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        assert_eq!(init_dictionary(20, 50, 7), init_dictionary(20, 50, 7));
        assert_ne!(init_dictionary(20, 50, 7), init_dictionary(20, 50, 8));
    }

    #[test]
    fn init_atoms_are_unit_norm() {
        let d = init_dictionary(20, 50, 3);
        for a in d.atoms() {
            assert!((norm2(a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_init_gram_is_off_diagonal_bounded() {
        let d = init_dictionary(2, 4, 1);
        for i in 0..4 {
            for j in 0..4 {
                let g = dot(d.atom(i), d.atom(j));
                if i == j {
                    assert!((g - 1.0).abs() < 1e-12);
                } else {
                    assert!(g > -1.0 && g < 1.0);
                }
            }
        }
    }

    #[test]
    fn rejects_zero_and_non_unit_atoms() {
        assert!(matches!(
            Dictionary::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]),
            Err(Error::InvalidDictionary(_))
        ));
        assert!(matches!(
            Dictionary::new(2, 1, vec![1.0, 1.0]),
            Err(Error::InvalidDictionary(_))
        ));
    }

    #[test]
    fn mat_round_trip() {
        let d = init_dictionary(3, 5, 2);
        let again = Dictionary::from_columns_normalized(&d.to_mat()).unwrap();
        assert!(d
            .atoms
            .iter()
            .zip(&again.atoms)
            .all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn reference_vector_is_unit() {
        assert!((norm2(&reference_vector(9, 4)) - 1.0).abs() < 1e-12);
    }
}
