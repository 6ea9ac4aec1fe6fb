//! Synthetic linear dataset: sparse random recipes whose features are a fixed
//! random projection of the normalized amounts plus Gaussian noise.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::amount_models::Sample;
use crate::io::FeatureRecord;
use crate::vectorizer::RecipeVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub ingredients: usize,
    pub recipes: usize,
    pub min_support: usize,
    pub max_support: usize,
    pub feature_dim: usize,
    pub noise_std: f64,
    /// Nonzero amounts are drawn uniformly from this range, in grams.
    pub min_grams: f64,
    pub max_grams: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            ingredients: 50,
            recipes: 500,
            min_support: 3,
            max_support: 10,
            feature_dim: 64,
            noise_std: 0.05,
            min_grams: 50.0,
            max_grams: 500.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Amounts in grams; ranges are zero.
    pub vectors: Vec<RecipeVector>,
    pub features: Vec<Vec<f64>>,
    /// kcal per gram for each ingredient.
    pub calories: Vec<f64>,
    /// `feature_dim × ingredients`, row-major.
    pub projection: Vec<f64>,
}

impl SyntheticDataset {
    pub fn generate(config: &SyntheticConfig) -> Self {
        assert!(config.min_support >= 1 && config.min_support <= config.max_support);
        assert!(config.max_support <= config.ingredients);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (n, d) = (config.ingredients, config.feature_dim);
        let unit = Normal::new(0.0, 1.0).expect("valid normal");
        let noise = Normal::new(0.0, config.noise_std).expect("valid normal");
        let projection: Vec<f64> = (0..d * n).map(|_| unit.sample(&mut rng)).collect();
        let calories: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..9.0)).collect();

        let mut vectors = Vec::with_capacity(config.recipes);
        let mut features = Vec::with_capacity(config.recipes);
        for r in 0..config.recipes {
            let k = rng.random_range(config.min_support..=config.max_support);
            let mut v = RecipeVector::zeros(format!("syn{r:04}"), n);
            for i in sample(&mut rng, n, k) {
                v.amounts[i] = rng.random_range(config.min_grams..config.max_grams).round();
            }
            let total = v.total();
            let x: Vec<f64> = (0..d)
                .map(|row| {
                    let clean: f64 = (0..n).map(|i| projection[row * n + i] * v.amounts[i] / total).sum();
                    clean + noise.sample(&mut rng)
                })
                .collect();
            vectors.push(v);
            features.push(x);
        }
        Self {
            vectors,
            features,
            calories,
            projection,
        }
    }

    /// Training samples with targets normalized to sum 1.
    pub fn samples(&self, indices: &[usize]) -> Vec<Sample> {
        indices
            .iter()
            .map(|&i| {
                let v = &self.vectors[i];
                let total = v.total();
                Sample {
                    id: v.id.clone(),
                    features: self.features[i].clone(),
                    target: v.amounts.iter().map(|a| a / total).collect(),
                }
            })
            .collect()
    }

    pub fn feature_records(&self) -> Vec<FeatureRecord> {
        self.vectors
            .iter()
            .zip(&self.features)
            .map(|(v, f)| FeatureRecord {
                id: v.id.clone(),
                features: f.clone(),
            })
            .collect()
    }
}
