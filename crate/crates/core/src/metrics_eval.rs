//! Evaluation of predicted amount vectors.
//!
//! An ingredient is detected when its predicted amount is nonzero. Detection
//! is scored by recall and IoU against the ground-truth ingredient set; amounts
//! by a range-aware L1 error and the relative calorie error (RCE), both after
//! normalizing ground truth and prediction to the same total.
//!
//! Normalized metrics are evaluated in exact rational arithmetic on the finite
//! `f64` inputs and rounded once at the end. Two disjoint normalized vectors
//! therefore score an L1 error of exactly `2C`, and the RCE does not depend on
//! the normalization constant.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonicalizer::cosine;
use crate::vectorizer::RecipeVector;

/// Normalization constant of the amount metrics: grams per kilogram of ingredients.
pub const METRIC_TOTAL: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("ground-truth ingredient set is empty")]
    EmptyGroundTruth,
    #[error("ground-truth amounts sum to zero")]
    ZeroGroundTruth,
    #[error("ground-truth calories are zero")]
    ZeroGroundTruthCalories,
    #[error("vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("prediction and reference ids do not match: {0}")]
    IdMismatch(String),
    #[error("recipe `{id}`: {source}")]
    Recipe { id: String, source: Box<MetricsError> },
    #[error("retrieval pool is empty")]
    EmptyPool,
    #[error("report has no recipes")]
    EmptyReport,
    #[error("histogram needs at least one bin")]
    BadBins,
}

/// Indices with a nonzero (positive) amount.
pub fn detect(v: &[f64]) -> BTreeSet<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `|gt ∩ pred| / |gt|`.
pub fn recall(gt: &BTreeSet<usize>, pred: &BTreeSet<usize>) -> Result<f64, MetricsError> {
    if gt.is_empty() {
        return Err(MetricsError::EmptyGroundTruth);
    }
    Ok(gt.intersection(pred).count() as f64 / gt.len() as f64)
}

/// `|gt ∩ pred| / |gt ∪ pred|`.
pub fn iou(gt: &BTreeSet<usize>, pred: &BTreeSet<usize>) -> Result<f64, MetricsError> {
    let union = gt.union(pred).count();
    if union == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    Ok(gt.intersection(pred).count() as f64 / union as f64)
}

/// How a prediction outside the ground-truth range is penalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfRange {
    /// Distance to the ground-truth amount.
    #[default]
    ToValue,
    /// Distance to the nearest edge of the range interval.
    ToEdge,
}

fn exact(x: f64) -> Result<BigRational, MetricsError> {
    BigRational::from_float(x).ok_or(MetricsError::NonFinite)
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn check_len(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

/// Exact normalized copies over the union of supports.
struct Normalized {
    dims: Vec<usize>,
    truth: Vec<BigRational>,
    range: Vec<BigRational>,
    pred: Vec<BigRational>,
}

fn normalize_pair(v_y: &[f64], v_r: Option<&[f64]>, v_x: &[f64], c: f64) -> Result<Normalized, MetricsError> {
    check_len(v_y, v_x)?;
    if let Some(r) = v_r {
        check_len(v_y, r)?;
    }
    let dims: Vec<usize> = (0..v_y.len())
        .filter(|&i| v_y[i] != 0.0 || v_x[i] != 0.0 || v_r.is_some_and(|r| r[i] != 0.0))
        .collect();
    let c = exact(c)?;
    let mut sum_y = BigRational::zero();
    let mut sum_x = BigRational::zero();
    let mut ys = Vec::with_capacity(dims.len());
    let mut xs = Vec::with_capacity(dims.len());
    let mut rs = Vec::with_capacity(dims.len());
    for &i in &dims {
        let y = exact(v_y[i])?;
        let x = exact(v_x[i])?;
        sum_y += &y;
        sum_x += &x;
        ys.push(y);
        xs.push(x);
        rs.push(exact(v_r.map_or(0.0, |r| r[i]))?);
    }
    if !sum_y.is_positive() {
        return Err(MetricsError::ZeroGroundTruth);
    }
    let scale_y = &c / &sum_y;
    let truth = ys.into_iter().map(|y| y * &scale_y).collect();
    let range = rs.into_iter().map(|r| r * &scale_y).collect();
    // an all-zero prediction stays all zero
    let pred = if sum_x.is_zero() {
        xs
    } else {
        let scale_x = &c / &sum_x;
        xs.into_iter().map(|x| x * &scale_x).collect()
    };
    Ok(Normalized {
        dims,
        truth,
        range,
        pred,
    })
}

/// Range-aware L1 error after normalizing both vectors to sum `c`.
///
/// The ground-truth range vector is scaled with the ground-truth amounts. A
/// dimension costs nothing when the prediction lies in
/// `[y - r/2, y + r/2]`, and `|x - y|` otherwise.
pub fn range_l1_error(v_y: &[f64], v_r: &[f64], v_x: &[f64], c: f64) -> Result<f64, MetricsError> {
    range_l1_error_with(v_y, v_r, v_x, c, OutOfRange::ToValue)
}

pub fn range_l1_error_with(
    v_y: &[f64],
    v_r: &[f64],
    v_x: &[f64],
    c: f64,
    mode: OutOfRange,
) -> Result<f64, MetricsError> {
    let n = normalize_pair(v_y, Some(v_r), v_x, c)?;
    let mut total = BigRational::zero();
    for k in 0..n.dims.len() {
        let (y, r, x) = (&n.truth[k], &n.range[k], &n.pred[k]);
        let half = r / BigRational::from_integer(BigInt::from(2));
        let low = y - &half;
        let high = y + &half;
        if *x < low || *x > high {
            total += match mode {
                OutOfRange::ToValue => (x - y).abs(),
                OutOfRange::ToEdge if *x < low => low - x,
                OutOfRange::ToEdge => x - high,
            };
        }
    }
    Ok(to_f64(&total))
}

/// `|C_y - C_x| / C_y` with `C = Σ c_i v_i` after normalizing both vectors to
/// the same total. An all-zero prediction scores 1.
pub fn relative_calorie_error(v_y: &[f64], v_x: &[f64], calories: &[f64]) -> Result<f64, MetricsError> {
    check_len(v_y, calories)?;
    let n = normalize_pair(v_y, None, v_x, METRIC_TOTAL)?;
    let mut cal_y = BigRational::zero();
    let mut cal_x = BigRational::zero();
    for (k, &i) in n.dims.iter().enumerate() {
        let c = exact(calories[i])?;
        cal_y += &c * &n.truth[k];
        cal_x += &c * &n.pred[k];
    }
    if cal_y.is_zero() {
        return Err(MetricsError::ZeroGroundTruthCalories);
    }
    Ok(to_f64(&((&cal_y - &cal_x).abs() / &cal_y)))
}

/// RCE from two calorie totals.
pub fn rce_from_totals(truth_kcal: f64, predicted_kcal: f64) -> Result<f64, MetricsError> {
    if truth_kcal == 0.0 {
        return Err(MetricsError::ZeroGroundTruthCalories);
    }
    Ok((truth_kcal - predicted_kcal).abs() / truth_kcal)
}

/// Index of the pool entry most cosine-similar to the query; ties go to the
/// earliest entry.
pub fn retrieve_nearest(query: &[f64], pool: &[&[f64]]) -> Result<usize, MetricsError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, candidate) in pool.iter().enumerate() {
        let s = cosine(query, candidate);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(MetricsError::EmptyPool)
}

/// Entry of a retrieval pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolEntry {
    Candidate(usize),
    GroundTruth,
}

/// Pool of up to `size` entries drawn at random from `eligible` candidates.
/// With `include_gt` the ground truth replaces one random draw at a random
/// position, so the pools with and without it differ by one recipe.
pub fn build_pool<R: Rng>(eligible: usize, size: usize, include_gt: bool, rng: &mut R) -> Vec<PoolEntry> {
    let mut pool: Vec<PoolEntry> = sample(rng, eligible, size.min(eligible))
        .into_iter()
        .map(PoolEntry::Candidate)
        .collect();
    if include_gt && size > 0 {
        let at = rng.random_range(0..=pool.len().min(size - 1));
        if pool.len() == size {
            pool.pop();
        }
        pool.insert(at.min(pool.len()), PoolEntry::GroundTruth);
    }
    pool
}

/// Retrieval baseline: each query's prediction is the amount vector of the
/// pool entry nearest to its feature. Candidates sharing the query's id are
/// never drawn. Each query samples from its own seeded stream, so runs with
/// and without the ground truth see the same random candidates.
pub fn retrieve_all(
    queries: &[(Vec<f64>, RecipeVector)],
    candidates: &[(Vec<f64>, RecipeVector)],
    pool_size: usize,
    include_gt: bool,
    seed: u64,
) -> Result<Vec<(String, Vec<f64>)>, MetricsError> {
    let mut out = Vec::with_capacity(queries.len());
    for (q, (features, truth)) in queries.iter().enumerate() {
        let eligible: Vec<usize> = (0..candidates.len())
            .filter(|&i| candidates[i].1.id != truth.id)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(q as u64);
        let pool: Vec<&(Vec<f64>, RecipeVector)> = build_pool(eligible.len(), pool_size, include_gt, &mut rng)
            .into_iter()
            .map(|e| match e {
                PoolEntry::Candidate(i) => &candidates[eligible[i]],
                PoolEntry::GroundTruth => &queries[q],
            })
            .collect();
        let feats: Vec<&[f64]> = pool.iter().map(|(f, _)| f.as_slice()).collect();
        let hit = pool[retrieve_nearest(features, &feats)?];
        out.push((truth.id.clone(), hit.1.amounts.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeMetrics {
    pub id: String,
    pub recall: f64,
    pub iou: f64,
    pub l1_error: f64,
    /// `None` when the ground truth carries no calories.
    pub rce: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recall: Summary,
    pub iou: Summary,
    pub l1_error: Summary,
    pub rce: Summary,
    /// Recipes left out of the RCE summary because their true calories are zero.
    pub rce_undefined: usize,
    pub recipes: Vec<RecipeMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub total: f64,
    pub out_of_range: OutOfRange,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            total: METRIC_TOTAL,
            out_of_range: OutOfRange::ToValue,
        }
    }
}

pub fn evaluate_recipe(
    truth: &RecipeVector,
    prediction: &[f64],
    calories: &[f64],
    options: &EvalOptions,
) -> Result<RecipeMetrics, MetricsError> {
    let wrap = |e: MetricsError| MetricsError::Recipe {
        id: truth.id.clone(),
        source: Box::new(e),
    };
    let gt = detect(&truth.amounts);
    let pred = detect(prediction);
    let rce = match relative_calorie_error(&truth.amounts, prediction, calories) {
        Ok(v) => Some(v),
        Err(MetricsError::ZeroGroundTruthCalories) => None,
        Err(e) => return Err(wrap(e)),
    };
    Ok(RecipeMetrics {
        id: truth.id.clone(),
        recall: recall(&gt, &pred).map_err(wrap)?,
        iou: iou(&gt, &pred).map_err(wrap)?,
        l1_error: range_l1_error_with(
            &truth.amounts,
            &truth.ranges,
            prediction,
            options.total,
            options.out_of_range,
        )
        .map_err(wrap)?,
        rce,
    })
}

/// Per-recipe metrics and their means and population standard deviations.
/// Predictions are matched to references by id; the report follows reference order.
pub fn evaluate_dataset(
    predictions: &[(String, Vec<f64>)],
    references: &[RecipeVector],
    calories: &[f64],
    options: &EvalOptions,
) -> Result<MetricsReport, MetricsError> {
    if predictions.len() != references.len() {
        return Err(MetricsError::IdMismatch(format!(
            "{} predictions for {} references",
            predictions.len(),
            references.len()
        )));
    }
    let by_id: HashMap<&str, &[f64]> = predictions.iter().map(|(id, v)| (id.as_str(), v.as_slice())).collect();
    if by_id.len() != predictions.len() {
        return Err(MetricsError::IdMismatch("duplicate prediction id".into()));
    }
    let mut recipes = Vec::with_capacity(references.len());
    for truth in references {
        let prediction = by_id
            .get(truth.id.as_str())
            .ok_or_else(|| MetricsError::IdMismatch(format!("no prediction for `{}`", truth.id)))?;
        recipes.push(evaluate_recipe(truth, prediction, calories, options)?);
    }
    let column = |f: fn(&RecipeMetrics) -> f64| recipes.iter().map(f).collect::<Vec<_>>();
    let rces: Vec<f64> = recipes.iter().filter_map(|r| r.rce).collect();
    Ok(MetricsReport {
        recall: Summary::of(&column(|r| r.recall)),
        iou: Summary::of(&column(|r| r.iou)),
        l1_error: Summary::of(&column(|r| r.l1_error)),
        rce: Summary::of(&rces),
        rce_undefined: recipes.len() - rces.len(),
        recipes,
    })
}

/// Log-spaced histogram of positive RCE values with a separate zero bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RceHistogram {
    pub zero_count: usize,
    /// `counts.len() + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub fraction_below_one: f64,
}

impl RceHistogram {
    pub fn total(&self) -> usize {
        self.zero_count + self.counts.iter().sum::<usize>()
    }

    /// `bin_low,bin_high,count` rows; the zero bucket is the `0,0` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_low,bin_high,count\n");
        out.push_str(&format!("0,0,{}\n", self.zero_count));
        for (i, count) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[i], self.edges[i + 1], count));
        }
        out
    }

    /// A static bar chart of the histogram.
    pub fn to_svg(&self) -> String {
        let (width, height, pad) = (640.0, 320.0, 40.0);
        let bars = self.counts.len() + 1;
        let peak = self
            .counts
            .iter()
            .copied()
            .chain([self.zero_count])
            .max()
            .unwrap_or(0)
            .max(1) as f64;
        let bar_w = (width - 2.0 * pad) / bars as f64;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
        );
        svg.push_str(&format!(
            "<line x1=\"{pad}\" y1=\"{y}\" x2=\"{x2}\" y2=\"{y}\" stroke=\"black\"/>\n",
            y = height - pad,
            x2 = width - pad
        ));
        let counts = std::iter::once(self.zero_count).chain(self.counts.iter().copied());
        for (i, count) in counts.enumerate() {
            let h = (height - 2.0 * pad) * count as f64 / peak;
            svg.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                pad + i as f64 * bar_w,
                height - pad - h,
                (bar_w - 1.0).max(0.5),
                h,
                if i == 0 { "#999999" } else { "#3b6ea5" }
            ));
        }
        if let (Some(lo), Some(hi)) = (self.edges.first(), self.edges.last()) {
            svg.push_str(&format!(
                "<text x=\"{pad}\" y=\"{}\" font-size=\"12\">RCE (log10) {:.3} .. {:.3}; zero bucket first; {:.1}% below 1</text>\n",
                height - pad / 3.0,
                lo.log10(),
                hi.log10(),
                100.0 * self.fraction_below_one
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

pub fn rce_histogram(report: &MetricsReport, bins: usize) -> Result<RceHistogram, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::BadBins);
    }
    let values: Vec<f64> = report.recipes.iter().filter_map(|r| r.rce).collect();
    if values.is_empty() {
        return Err(MetricsError::EmptyReport);
    }
    let zero_count = values.iter().filter(|v| **v == 0.0).count();
    let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    let below = values.iter().filter(|v| **v < 1.0).count();
    let mut counts = vec![0usize; bins];
    let edges = if positive.is_empty() {
        (0..=bins).map(|i| 10f64.powi(i as i32 - bins as i32)).collect()
    } else {
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min).log10();
        let mut hi = positive.iter().copied().fold(0.0, f64::max).log10();
        if hi <= lo {
            hi = lo + 1.0;
        }
        let step = (hi - lo) / bins as f64;
        for v in &positive {
            let b = ((v.log10() - lo) / step).floor() as usize;
            counts[b.min(bins - 1)] += 1;
        }
        (0..=bins).map(|i| 10f64.powf(lo + step * i as f64)).collect()
    };
    Ok(RceHistogram {
        zero_count,
        edges,
        counts,
        fraction_below_one: below as f64 / values.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn detection() {
        assert_eq!(detect(&[0.0, 3.0, 0.0, 1.0]), set(&[1, 3]));
        assert!(detect(&[0.0; 4]).is_empty());
        assert_eq!(detect(&[0.1, 2.0]), set(&[0, 1]));
    }

    #[test]
    fn recall_and_iou() {
        // flour 0, sugar 1, butter 2, salt 3
        let gt = set(&[0, 1, 2]);
        let pred = set(&[0, 1, 3]);
        assert!((recall(&gt, &pred).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&gt, &pred).unwrap(), 0.5);
        assert_eq!((recall(&gt, &gt).unwrap(), iou(&gt, &gt).unwrap()), (1.0, 1.0));
        let other = set(&[5, 6]);
        assert_eq!((recall(&gt, &other).unwrap(), iou(&gt, &other).unwrap()), (0.0, 0.0));
        assert_eq!(recall(&set(&[]), &pred), Err(MetricsError::EmptyGroundTruth));
        assert_eq!(iou(&set(&[]), &set(&[])), Err(MetricsError::EmptyGroundTruth));
    }

    #[test]
    fn l1_examples() {
        let e = range_l1_error(&[300.0, 700.0, 0.0], &[0.0; 3], &[0.0, 0.0, 5.0], 1000.0).unwrap();
        assert_eq!(e, 2000.0);
        let same = range_l1_error(&[1.0, 3.0], &[0.0, 0.0], &[250.0, 750.0], 1000.0).unwrap();
        assert_eq!(same, 0.0);
        let e = range_l1_error(&[600.0, 400.0], &[40.0, 0.0], &[580.0, 420.0], 1000.0).unwrap();
        assert_eq!(e, 20.0);
        let edge = range_l1_error_with(
            &[600.0, 400.0],
            &[40.0, 0.0],
            &[570.0, 430.0],
            1000.0,
            OutOfRange::ToEdge,
        )
        .unwrap();
        assert_eq!(edge, 10.0 + 30.0);
        assert_eq!(
            range_l1_error(&[0.0], &[0.0], &[1.0], 1000.0),
            Err(MetricsError::ZeroGroundTruth)
        );
    }

    #[test]
    fn zero_prediction_rule() {
        let y = [2.0, 2.0];
        assert_eq!(range_l1_error(&y, &[0.0, 0.0], &[0.0, 0.0], 1000.0).unwrap(), 1000.0);
        assert_eq!(relative_calorie_error(&y, &[0.0, 0.0], &[1.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn rce_examples() {
        let c = [1.0, 3.0];
        assert_eq!(
            relative_calorie_error(&[500.0, 500.0], &[500.0, 500.0], &c).unwrap(),
            0.0
        );
        assert_eq!(
            relative_calorie_error(&[500.0, 500.0], &[1000.0, 0.0], &c).unwrap(),
            0.5
        );
        assert_eq!(
            relative_calorie_error(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 5.0]),
            Err(MetricsError::ZeroGroundTruthCalories)
        );
        let r = rce_from_totals(1.11, 5255.65).unwrap();
        // (5255.65 - 1.11) / 1.11 = 5254.54 / 1.11
        assert!((r - 4_733.819_819_8).abs() < 1e-6, "{r}");
        assert!((r - 4725.32).abs() / 4725.32 < 0.002);
    }

    #[test]
    fn retrieval_tie_break() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        assert_eq!(retrieve_nearest(&[0.0, 0.0, 1.0][..2], &[&a, &b]).unwrap(), 0);
        assert_eq!(retrieve_nearest(&[0.2, 0.9], &[&a, &b]).unwrap(), 1);
        assert_eq!(retrieve_nearest(&[5.0, 5.0], &[&b]).unwrap(), 0);
        let c = [1.0, 0.0, 0.0];
        let d = [0.0, 1.0, 0.0];
        assert_eq!(retrieve_nearest(&[0.0, 0.0, 1.0], &[&c, &d]).unwrap(), 0);
        assert_eq!(retrieve_nearest(&[1.0], &[]), Err(MetricsError::EmptyPool));
    }

    #[test]
    fn pools_differ_by_one() {
        for seed in [0, 3, 11] {
            let mut r1 = ChaCha8Rng::seed_from_u64(seed);
            let mut r2 = ChaCha8Rng::seed_from_u64(seed);
            let without = build_pool(19, 5, false, &mut r1);
            let with = build_pool(19, 5, true, &mut r2);
            assert_eq!((without.len(), with.len()), (5, 5));
            assert!(!without.contains(&PoolEntry::GroundTruth));
            assert!(with.contains(&PoolEntry::GroundTruth));
            assert_eq!(without.iter().filter(|e| !with.contains(e)).count(), 1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let small = build_pool(3, 1000, true, &mut rng);
        assert_eq!(small.len(), 4);
        assert!(build_pool(0, 1000, false, &mut rng).is_empty());
    }

    #[test]
    fn retrieval_with_ground_truth_is_exact() {
        let items: Vec<(Vec<f64>, RecipeVector)> = (0..6)
            .map(|i| {
                let mut f = vec![0.1; 4];
                f[i % 4] = 1.0 + i as f64;
                (f, rv(&format!("r{i}"), &[i as f64 + 1.0, 1.0]))
            })
            .collect();
        let with = retrieve_all(&items, &items, 3, true, 9).unwrap();
        for ((_, truth), (id, amounts)) in items.iter().zip(&with) {
            assert_eq!(id, &truth.id);
            assert_eq!(amounts, &truth.amounts);
        }
        let without = retrieve_all(&items, &items, 3, false, 9).unwrap();
        assert!(without.iter().zip(&items).all(|((_, a), (_, t))| a != &t.amounts));
        assert_eq!(without, retrieve_all(&items, &items, 3, false, 9).unwrap());
    }

    fn rv(id: &str, amounts: &[f64]) -> RecipeVector {
        RecipeVector {
            id: id.into(),
            amounts: amounts.to_vec(),
            ranges: vec![0.0; amounts.len()],
        }
    }

    #[test]
    fn dataset_examples() {
        let refs = vec![rv("a", &[1.0, 1.0, 0.0]), rv("b", &[0.0, 2.0, 1.0])];
        let cal = [1.0, 2.0, 3.0];
        let preds: Vec<_> = refs.iter().map(|r| (r.id.clone(), r.amounts.clone())).collect();
        let report = evaluate_dataset(&preds, &refs, &cal, &EvalOptions::default()).unwrap();
        assert_eq!(report.recall, Summary { mean: 1.0, std: 0.0 });
        assert_eq!(report.iou, Summary { mean: 1.0, std: 0.0 });
        assert_eq!(report.l1_error, Summary { mean: 0.0, std: 0.0 });
        assert_eq!(report.rce, Summary { mean: 0.0, std: 0.0 });

        let preds = vec![
            ("b".to_string(), vec![1.0, 0.0, 0.0]),
            ("a".to_string(), vec![1.0, 1.0, 0.0]),
        ];
        let report = evaluate_dataset(&preds, &refs, &cal, &EvalOptions::default()).unwrap();
        assert_eq!(report.recipes[0].id, "a");
        assert_eq!(report.recall, Summary { mean: 0.5, std: 0.5 });

        let missing = vec![
            ("a".to_string(), vec![1.0, 0.0, 0.0]),
            ("z".to_string(), vec![1.0, 0.0, 0.0]),
        ];
        assert!(matches!(
            evaluate_dataset(&missing, &refs, &cal, &EvalOptions::default()),
            Err(MetricsError::IdMismatch(_))
        ));
        assert!(matches!(
            evaluate_dataset(&missing[..1], &refs, &cal, &EvalOptions::default()),
            Err(MetricsError::IdMismatch(_))
        ));
    }

    #[test]
    fn undefined_rce_is_counted_not_fatal() {
        let refs = vec![rv("a", &[1.0, 0.0]), rv("b", &[0.0, 1.0])];
        let preds: Vec<_> = refs.iter().map(|r| (r.id.clone(), r.amounts.clone())).collect();
        let report = evaluate_dataset(&preds, &refs, &[0.0, 2.0], &EvalOptions::default()).unwrap();
        assert_eq!(report.rce_undefined, 1);
        assert_eq!(report.recipes[0].rce, None);
        assert_eq!(report.rce.mean, 0.0);
    }

    fn report_with(rces: &[f64]) -> MetricsReport {
        let recipes: Vec<RecipeMetrics> = rces
            .iter()
            .enumerate()
            .map(|(i, r)| RecipeMetrics {
                id: i.to_string(),
                recall: 1.0,
                iou: 1.0,
                l1_error: 0.0,
                rce: Some(*r),
            })
            .collect();
        MetricsReport {
            recall: Summary::of(&[]),
            iou: Summary::of(&[]),
            l1_error: Summary::of(&[]),
            rce: Summary::of(rces),
            rce_undefined: 0,
            recipes,
        }
    }

    #[test]
    fn histogram_examples() {
        let h = rce_histogram(&report_with(&[0.0, 0.0, 0.0]), 10).unwrap();
        assert_eq!((h.zero_count, h.counts.iter().sum::<usize>()), (3, 0));
        assert_eq!(h.fraction_below_one, 1.0);

        let h = rce_histogram(&report_with(&[0.5, 2.0]), 4).unwrap();
        assert_eq!(h.fraction_below_one, 0.5);
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts, vec![1, 0, 0, 1]);

        let values = [0.0, 1e-3, 0.02, 0.5, 0.5, 3.0, 4725.32];
        let h = rce_histogram(&report_with(&values), 50).unwrap();
        assert_eq!(h.total(), values.len());
        assert_eq!(h.edges.len(), 51);
        assert!(h.to_csv().starts_with("bin_low,bin_high,count\n0,0,1\n"));
        assert!(h.to_svg().contains("<rect"));

        assert_eq!(rce_histogram(&report_with(&[1.0]), 0), Err(MetricsError::BadBins));
        assert_eq!(rce_histogram(&report_with(&[]), 3), Err(MetricsError::EmptyReport));
        let single = rce_histogram(&report_with(&[2.0, 2.0]), 3).unwrap();
        assert_eq!(single.counts, vec![2, 0, 0]);
    }
}
