//! Discrete search spaces and their one-hot encoding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Product of `d` categorical variables with per-variable cardinalities
/// `k_i >= 2`. Binary spaces have every `k_i = 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    cardinalities: Vec<usize>,
}

/// One category index per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HardAssignment(pub Vec<usize>);

impl HardAssignment {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Number of non-zero categories (the L1 norm for binary points).
    pub fn count_nonzero(&self) -> usize {
        self.0.iter().filter(|&&c| c != 0).count()
    }
}

impl From<Vec<usize>> for HardAssignment {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl SearchSpace {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::Contract("search space needs at least one variable".into()));
        }
        if let Some(k) = cardinalities.iter().find(|&&k| k < 2) {
            return Err(Error::Contract(format!("cardinality {k} < 2")));
        }
        Ok(Self { cardinalities })
    }

    pub fn binary(dims: usize) -> Result<Self> {
        Self::new(vec![2; dims])
    }

    pub fn categorical(dims: usize, categories: usize) -> Result<Self> {
        Self::new(vec![categories; dims])
    }

    pub fn dims(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// Width of the concatenated one-hot encoding, `sum_i k_i`.
    pub fn one_hot_width(&self) -> usize {
        self.cardinalities.iter().sum()
    }

    /// Number of points, as a float so large spaces do not overflow.
    pub fn size(&self) -> f64 {
        self.cardinalities.iter().map(|&k| k as f64).product()
    }

    pub fn contains(&self, x: &HardAssignment) -> bool {
        x.0.len() == self.dims() && x.0.iter().zip(&self.cardinalities).all(|(&c, &k)| c < k)
    }

    pub fn check(&self, x: &HardAssignment) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Contract(format!("{:?} is not a point of {:?}", x.0, self.cardinalities)))
        }
    }

    pub fn encode_into(&self, x: &HardAssignment, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut at = 0;
        for (&c, &k) in x.0.iter().zip(&self.cardinalities) {
            out[at + c] = 1.0;
            at += k;
        }
    }

    /// Concatenated one-hot encoding.
    pub fn encode(&self, x: &HardAssignment) -> Vec<f64> {
        let mut out = vec![0.0; self.one_hot_width()];
        self.encode_into(x, &mut out);
        out
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> HardAssignment {
        HardAssignment(self.cardinalities.iter().map(|&k| rng.random_range(0..k)).collect())
    }

    /// Mixed-radix decoding of `index` (first variable varies fastest).
    pub fn point_at(&self, mut index: u64) -> HardAssignment {
        HardAssignment(
            self.cardinalities
                .iter()
                .map(|&k| {
                    let c = (index % k as u64) as usize;
                    index /= k as u64;
                    c
                })
                .collect(),
        )
    }

    pub fn index_of(&self, x: &HardAssignment) -> u64 {
        x.0.iter()
            .zip(&self.cardinalities)
            .rev()
            .fold(0u64, |acc, (&c, &k)| acc * k as u64 + c as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_spaces() {
        assert!(SearchSpace::new(vec![]).is_err());
        assert!(SearchSpace::new(vec![2, 1]).is_err());
    }

    #[test]
    fn one_hot_layout() {
        let s = SearchSpace::new(vec![2, 3]).unwrap();
        assert_eq!(s.encode(&HardAssignment(vec![1, 2])), [0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.size(), 6.0);
        assert!(!s.contains(&HardAssignment(vec![2, 0])));
    }

    #[test]
    fn index_round_trip() {
        let s = SearchSpace::new(vec![3, 2, 5]).unwrap();
        for i in 0..30 {
            assert_eq!(s.index_of(&s.point_at(i)), i);
        }
    }
}
