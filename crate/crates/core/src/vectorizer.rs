//! Amount and range vectors over the canonical vocabulary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonicalizer::CanonicalVocabulary;
use crate::unit_converter::ConvertedLine;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("ingredient `{0}` is not in the vocabulary")]
    UnresolvedIngredient(String),
    #[error("recipe `{0}` has zero total amount")]
    ZeroTotal(String),
    #[error("normalization constant must be positive, got {0}")]
    BadConstant(f64),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

/// Per-ingredient amounts and range widths. Index `i` is zero in `amounts`
/// exactly when ingredient `i` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeVector {
    pub id: String,
    pub amounts: Vec<f64>,
    pub ranges: Vec<f64>,
}

impl RecipeVector {
    pub fn zeros(id: impl Into<String>, dim: usize) -> Self {
        Self {
            id: id.into(),
            amounts: vec![0.0; dim],
            ranges: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.amounts.len()
    }

    pub fn total(&self) -> f64 {
        self.amounts.iter().sum()
    }

    pub fn support(&self) -> Vec<usize> {
        self.amounts
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_record(&self) -> VectorRecord {
        VectorRecord {
            id: self.id.clone(),
            amounts: sparse(&self.amounts),
            ranges: sparse(&self.ranges),
        }
    }

    pub fn from_record(record: &VectorRecord, dim: usize) -> Result<Self, VectorError> {
        Ok(Self {
            id: record.id.clone(),
            amounts: dense(&record.amounts, dim)?,
            ranges: dense(&record.ranges, dim)?,
        })
    }
}

/// Line of the vectorized dataset file; absent indices are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub id: String,
    pub amounts: Vec<(usize, f64)>,
    #[serde(default)]
    pub ranges: Vec<(usize, f64)>,
}

pub fn sparse(values: &[f64]) -> Vec<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect()
}

pub fn dense(pairs: &[(usize, f64)], dim: usize) -> Result<Vec<f64>, VectorError> {
    let mut out = vec![0.0; dim];
    for &(index, value) in pairs {
        *out.get_mut(index).ok_or(VectorError::IndexOutOfRange { index, dim })? += value;
    }
    Ok(out)
}

/// Sums each line's grams (and range widths) into its ingredient's slot.
pub fn vectorize_recipe(
    id: &str,
    lines: &[ConvertedLine],
    vocab: &CanonicalVocabulary,
) -> Result<RecipeVector, VectorError> {
    let mut v = RecipeVector::zeros(id, vocab.len());
    for line in lines {
        let i = vocab
            .resolve(&line.ingredient)
            .ok_or_else(|| VectorError::UnresolvedIngredient(line.ingredient.clone()))?;
        v.amounts[i] += line.grams;
        v.ranges[i] += line.range;
    }
    Ok(v)
}

/// Scales `values` by `c / Σ values`. Returns `None` when the sum is not positive.
pub fn scale_to_sum(values: &[f64], c: f64) -> Option<Vec<f64>> {
    let total: f64 = values.iter().sum();
    (total > 0.0).then(|| values.iter().map(|v| v * c / total).collect())
}

/// Rescales amounts to sum `c`; ranges ride the same scale factor.
pub fn normalize_amounts(v: &RecipeVector, c: f64) -> Result<RecipeVector, VectorError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(VectorError::BadConstant(c));
    }
    let total = v.total();
    if !(total > 0.0) {
        return Err(VectorError::ZeroTotal(v.id.clone()));
    }
    Ok(RecipeVector {
        id: v.id.clone(),
        amounts: v.amounts.iter().map(|x| x * c / total).collect(),
        ranges: v.ranges.iter().map(|x| x * c / total).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(amounts: &[f64], ranges: &[f64]) -> RecipeVector {
        RecipeVector {
            id: "r".into(),
            amounts: amounts.to_vec(),
            ranges: ranges.to_vec(),
        }
    }

    fn line(name: &str, grams: f64, range: f64) -> ConvertedLine {
        ConvertedLine {
            ingredient: name.into(),
            index: 0,
            grams,
            range,
        }
    }

    #[test]
    fn vectorize_examples() {
        let vocab = CanonicalVocabulary::identity(&["cheese_ravioli", "flour", "salt"]);
        let v = vectorize_recipe("r", &[line("cheese_ravioli", 686.0, 28.0)], &vocab).unwrap();
        assert_eq!(v.amounts, vec![686.0, 0.0, 0.0]);
        assert_eq!(v.ranges, vec![28.0, 0.0, 0.0]);

        let acc = vectorize_recipe("r", &[line("flour", 100.0, 0.0), line("flour", 50.0, 0.0)], &vocab).unwrap();
        assert_eq!(acc.amounts[1], 150.0);

        let empty = vectorize_recipe("r", &[], &vocab).unwrap();
        assert_eq!(empty.amounts, vec![0.0; 3]);
        assert_eq!(empty.ranges, vec![0.0; 3]);

        assert_eq!(
            vectorize_recipe("r", &[line("sugar", 1.0, 0.0)], &vocab),
            Err(VectorError::UnresolvedIngredient("sugar".into()))
        );
    }

    #[test]
    fn normalize_examples() {
        let v = normalize_amounts(&vector(&[1.0, 1.0, 2.0], &[0.0; 3]), 1000.0).unwrap();
        assert_eq!(v.amounts, vec![250.0, 250.0, 500.0]);

        let ravioli = normalize_amounts(&vector(&[686.0, 0.0], &[28.0, 0.0]), 1000.0).unwrap();
        assert_eq!(ravioli.amounts, vec![1000.0, 0.0]);
        // 28 * 1000 / 686 = 40.8163...
        assert!((ravioli.ranges[0] - 28.0 * 1000.0 / 686.0).abs() < 1e-12);
        assert!((ravioli.ranges[0] - 40.816_326_530_612_24).abs() < 1e-9);

        assert_eq!(
            normalize_amounts(&vector(&[0.0, 0.0], &[0.0, 0.0]), 1.0),
            Err(VectorError::ZeroTotal("r".into()))
        );
        assert!(normalize_amounts(&vector(&[1.0], &[0.0]), 0.0).is_err());
    }

    #[test]
    fn sparse_round_trip() {
        let v = vector(&[0.0, 3.5, 0.0, 1.0], &[0.0, 0.5, 0.0, 0.0]);
        let back = RecipeVector::from_record(&v.to_record(), 4).unwrap();
        assert_eq!(back, v);
        assert!(RecipeVector::from_record(&v.to_record(), 2).is_err());
    }
}
