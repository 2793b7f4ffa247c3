//! Minimum-residue classification over per-class dictionaries.

use crate::coding::omp_encode;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2};

/// Codes a sample jointly against all class dictionaries and assigns the
/// class whose share of the code leaves the smallest residual.
#[derive(Debug, Clone)]
pub struct MinResidueClassifier {
    joint: Dictionary,
    /// `offsets[c]..offsets[c + 1]` are class `c`'s atoms in `joint`.
    offsets: Vec<usize>,
    t0: usize,
}

impl MinResidueClassifier {
    pub fn new(class_dicts: &[Dictionary], t0: usize) -> Result<Self> {
        if class_dicts.is_empty() {
            return Err(Error::InvalidInput("no class dictionaries".into()));
        }
        let refs: Vec<&Dictionary> = class_dicts.iter().collect();
        let joint = Dictionary::concat(&refs)?;
        let mut offsets = vec![0];
        for d in class_dicts {
            offsets.push(offsets.last().unwrap() + d.width());
        }
        Ok(MinResidueClassifier { joint, offsets, t0 })
    }

    pub fn classes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Residue `‖y − D_c x_c‖₂` for each class.
    pub fn residues(&self, y: &[f64]) -> Result<Vec<f64>> {
        let code = omp_encode(y, &self.joint, self.t0)?;
        Ok(self
            .offsets
            .windows(2)
            .map(|w| {
                let mut r = y.to_vec();
                for (&j, &v) in code.support().iter().zip(code.values()) {
                    if (w[0]..w[1]).contains(&j) {
                        axpy(-v, self.joint.atom(j), &mut r);
                    }
                }
                norm2(&r)
            })
            .collect())
    }

    /// Class with the smallest residue; the lowest index wins ties.
    pub fn classify(&self, y: &[f64]) -> Result<usize> {
        let residues = self.residues(y)?;
        let mut best = 0;
        for (c, &r) in residues.iter().enumerate() {
            if r < residues[best] {
                best = c;
            }
        }
        Ok(best)
    }
}

pub fn classify_min_residue(y: &[f64], class_dicts: &[Dictionary], t0: usize) -> Result<usize> {
    MinResidueClassifier::new(class_dicts, t0)?.classify(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::init_dictionary;
    use crate::rng::{random_unit_vector, stream_rng, Stream};

    #[test]
    fn atom_of_a_class_is_assigned_to_it() {
        let dicts: Vec<Dictionary> = (0..3).map(|c| init_dictionary(10, 4, c)).collect();
        let y = dicts[2].atom(1).to_vec();
        assert_eq!(classify_min_residue(&y, &dicts, 1).unwrap(), 2);
    }

    #[test]
    fn ties_go_to_the_first_class() {
        let d = init_dictionary(6, 3, 4);
        let dicts = vec![d.clone(), d];
        // Identical dictionaries: OMP picks the first copy, so class 1 keeps
        // the full sample as residue while class 0 absorbs it... unless the
        // sample is zero, where every residue is equal.
        assert_eq!(classify_min_residue(&[0.0; 6], &dicts, 2).unwrap(), 0);
    }

    #[test]
    fn decision_matches_recomputed_residues() {
        let dicts: Vec<Dictionary> = (0..3).map(|c| init_dictionary(8, 3, 10 + c)).collect();
        let clf = MinResidueClassifier::new(&dicts, 3).unwrap();
        let joint = Dictionary::concat(&dicts.iter().collect::<Vec<_>>()).unwrap();
        let mut rng = stream_rng(1, Stream::Synthetic);
        for _ in 0..20 {
            let y = random_unit_vector(&mut rng, 8);
            let code = omp_encode(&y, &joint, 3).unwrap();
            let residues: Vec<f64> = (0..3)
                .map(|c| {
                    let mut r = y.clone();
                    for (&j, &v) in code.support().iter().zip(code.values()) {
                        if j / 3 == c {
                            axpy(-v, joint.atom(j), &mut r);
                        }
                    }
                    norm2(&r)
                })
                .collect();
            let expected = (0..3).fold(0, |b, c| if residues[c] < residues[b] { c } else { b });
            assert_eq!(clf.classify(&y).unwrap(), expected);
        }
    }

    #[test]
    fn single_class_always_wins() {
        let dicts = vec![init_dictionary(5, 4, 0)];
        let mut rng = stream_rng(2, Stream::Synthetic);
        for _ in 0..5 {
            assert_eq!(
                classify_min_residue(&random_unit_vector(&mut rng, 5), &dicts, 2).unwrap(),
                0
            );
        }
    }
}
