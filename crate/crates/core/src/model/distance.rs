//! Symmetric meter-to-meter distance matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MeterId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Mfp,
    Euclidean,
    /// 1 - max(pcc, 0), the phase-identification distance.
    PccComplement,
}

/// Full symmetric N×N matrix of nonnegative distances.
///
/// Pairs that could not be computed (insufficient overlap) are flagged
/// invalid; their entries are meaningless until [`DistanceMatrix::fill_invalid`]
/// is applied, and distance consumers reject matrices with live flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Vec<f64>,
    n: usize,
    kind: DistanceKind,
    meter_order: Vec<MeterId>,
    invalid: Vec<(usize, usize)>,
}

impl DistanceMatrix {
    pub fn from_symmetric(
        kind: DistanceKind,
        meter_order: Vec<MeterId>,
        values: Vec<f64>,
        mut invalid: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = meter_order.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: values.len() });
        }
        invalid.sort_unstable();
        invalid.dedup();
        let m = Self { values, n, kind, meter_order, invalid };
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::Config(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                if m.is_valid(i, j) {
                    let (a, b) = (m.get(i, j), m.get(j, i));
                    if a != b {
                        return Err(Error::Config(format!("asymmetry at ({i},{j}): {a} vs {b}")));
                    }
                    if !(a >= 0.0) {
                        return Err(Error::Config(format!("negative distance at ({i},{j})")));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn meter_order(&self) -> &[MeterId] {
        &self.meter_order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.invalid.binary_search(&key).is_err()
    }

    pub fn invalid_pairs(&self) -> &[(usize, usize)] {
        &self.invalid
    }

    /// Fails when any pair is flagged invalid.
    pub fn require_valid(&self) -> Result<()> {
        if self.invalid.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPairs { count: self.invalid.len() })
        }
    }

    /// Replaces invalid entries with a maximally dissimilar value:
    /// 1 - 1e-9 for MFP, twice the largest valid entry otherwise.
    pub fn fill_invalid(mut self) -> Self {
        if self.invalid.is_empty() {
            return self;
        }
        let fill = match self.kind {
            DistanceKind::Mfp => 1.0 - 1e-9,
            DistanceKind::PccComplement => 1.0,
            DistanceKind::Euclidean => {
                let mut max = 0.0f64;
                for i in 0..self.n {
                    for j in (i + 1)..self.n {
                        if self.is_valid(i, j) {
                            max = max.max(self.get(i, j));
                        }
                    }
                }
                (max * 2.0).max(1.0)
            }
        };
        for &(i, j) in &self.invalid {
            self.values[i * self.n + j] = fill;
            self.values[j * self.n + i] = fill;
        }
        self.invalid.clear();
        self
    }

    /// Writes a square CSV with a meter-id header row and column.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "meter")?;
        for id in &self.meter_order {
            write!(f, ",{id}")?;
        }
        writeln!(f)?;
        for i in 0..self.n {
            write!(f, "{}", self.meter_order[i])?;
            for j in 0..self.n {
                if self.is_valid(i, j) {
                    write!(f, ",{}", self.get(i, j))?;
                } else {
                    write!(f, ",")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_and_diagonal_enforced() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(DistanceMatrix::from_symmetric(
            DistanceKind::Mfp,
            ids.clone(),
            vec![0.0, 0.3, 0.3, 0.0],
            vec![]
        )
        .is_ok());
        assert!(DistanceMatrix::from_symmetric(
            DistanceKind::Mfp,
            ids.clone(),
            vec![0.0, 0.3, 0.2, 0.0],
            vec![]
        )
        .is_err());
        assert!(DistanceMatrix::from_symmetric(
            DistanceKind::Mfp,
            ids,
            vec![0.1, 0.3, 0.3, 0.0],
            vec![]
        )
        .is_err());
    }

    #[test]
    fn fill_invalid_mfp_uses_near_one() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let m = DistanceMatrix::from_symmetric(
            DistanceKind::Mfp,
            ids,
            vec![0.0, 9.9, 9.9, 0.0],
            vec![(0, 1)],
        )
        .unwrap();
        assert!(m.require_valid().is_err());
        let filled = m.fill_invalid();
        filled.require_valid().unwrap();
        assert!(filled.get(0, 1) < 1.0 && filled.get(0, 1) > 0.999);
    }
}
