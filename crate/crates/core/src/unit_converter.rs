//! Gram conversion.
//!
//! Weight units convert the same way for every ingredient. Volume and counting
//! units are per ingredient and come from nutrition-database response records:
//! each record's alternative measures give grams per unit, and its calorie and
//! serving-weight fields give a calorie density.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonicalizer::{stem_name, CanonicalVocabulary};
use crate::quantity_parser::{tokenize, ParsedIngredientLine};
use crate::units::{UnitClass, UnitVocabulary, NO_UNIT};

/// Ingredient column value marking a global (weight) row in the table file.
pub const GLOBAL_ROW: &str = "*";

/// Grams per weight unit. The ounce is 28 g exactly so that 24.5 oz is 686 g.
pub const DEFAULT_WEIGHTS: [(&str, f64); 4] = [("g", 1.0), ("kg", 1000.0), ("ounce", 28.0), ("lb", 453.6)];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConversionError {
    #[error("line {line}: {message}")]
    MalformedTable { line: usize, message: String },
    #[error("grams per unit must be positive, got {grams} for `{ingredient}` / `{unit}`")]
    NonPositiveGrams {
        ingredient: String,
        unit: String,
        grams: f64,
    },
    #[error("calorie density must be nonnegative, got {0}")]
    NegativeCalories(f64),
    #[error("`{0}` is a weight unit; weight conversions are global")]
    PerIngredientWeight(String),
    #[error("two mapping records share the name `{0}`")]
    DuplicateName(String),
    #[error("conversion fraction {0} is outside [0, 1]")]
    BadFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConversionTable {
    weights: BTreeMap<String, f64>,
    per_ingredient: BTreeMap<(usize, String), f64>,
    calories: BTreeMap<usize, f64>,
}

impl ConversionTable {
    /// Empty per-ingredient table with the default weight units.
    pub fn new() -> Self {
        Self {
            weights: DEFAULT_WEIGHTS.iter().map(|(u, g)| (u.to_string(), *g)).collect(),
            ..Default::default()
        }
    }

    pub fn set_weight(&mut self, unit: &str, grams: f64) -> Result<(), ConversionError> {
        if !(grams > 0.0 && grams.is_finite()) {
            return Err(ConversionError::NonPositiveGrams {
                ingredient: GLOBAL_ROW.into(),
                unit: unit.into(),
                grams,
            });
        }
        self.weights.insert(unit.to_string(), grams);
        Ok(())
    }

    pub fn insert(&mut self, ingredient: usize, unit: &str, grams: f64) -> Result<(), ConversionError> {
        if !(grams > 0.0 && grams.is_finite()) {
            return Err(ConversionError::NonPositiveGrams {
                ingredient: ingredient.to_string(),
                unit: unit.into(),
                grams,
            });
        }
        if self.weights.contains_key(unit) {
            return Err(ConversionError::PerIngredientWeight(unit.into()));
        }
        self.per_ingredient.insert((ingredient, unit.to_string()), grams);
        Ok(())
    }

    pub fn set_calorie_density(&mut self, ingredient: usize, kcal_per_gram: f64) -> Result<(), ConversionError> {
        if !(kcal_per_gram >= 0.0 && kcal_per_gram.is_finite()) {
            return Err(ConversionError::NegativeCalories(kcal_per_gram));
        }
        self.calories.insert(ingredient, kcal_per_gram);
        Ok(())
    }

    pub fn grams_per_unit(&self, ingredient: usize, unit: &str) -> Option<f64> {
        self.weights
            .get(unit)
            .or_else(|| self.per_ingredient.get(&(ingredient, unit.to_string())))
            .copied()
    }

    pub fn calorie_density(&self, ingredient: usize) -> Option<f64> {
        self.calories.get(&ingredient).copied()
    }

    /// Dense calorie densities for `n` ingredients; missing entries are 0.
    pub fn calorie_vector(&self, n: usize) -> Vec<f64> {
        let missing = (0..n).filter(|i| !self.calories.contains_key(i)).count();
        if missing > 0 {
            log::warn!("{missing} of {n} ingredients have no calorie density; using 0 kcal/g");
        }
        (0..n).map(|i| self.calories.get(&i).copied().unwrap_or(0.0)).collect()
    }

    /// Reads the grams TSV (`ingredient<TAB>unit<TAB>grams`) and the calorie TSV
    /// (`ingredient<TAB>kcal_per_gram`). Ingredients are resolved through the
    /// vocabulary; rows for unknown ingredients are skipped.
    pub fn from_tsv(grams: &str, calories: &str, vocab: &CanonicalVocabulary) -> Result<Self, ConversionError> {
        let mut table = Self::new();
        let mut skipped = BTreeSet::new();
        for (n, line) in grams.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [ingredient, unit, value] = fields[..] else {
                return Err(ConversionError::MalformedTable {
                    line: n + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            };
            let value: f64 = value.trim().parse().map_err(|e| ConversionError::MalformedTable {
                line: n + 1,
                message: format!("bad grams `{value}`: {e}"),
            })?;
            if ingredient == GLOBAL_ROW {
                table.set_weight(unit, value)?;
            } else if let Some(idx) = vocab.resolve(ingredient) {
                table.insert(idx, unit, value)?;
            } else {
                skipped.insert(ingredient.to_string());
            }
        }
        for (n, line) in calories.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (ingredient, value) = line.rsplit_once('\t').ok_or(ConversionError::MalformedTable {
                line: n + 1,
                message: "expected `ingredient<TAB>kcal_per_gram`".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|e| ConversionError::MalformedTable {
                line: n + 1,
                message: format!("bad calorie density `{value}`: {e}"),
            })?;
            match vocab.resolve(ingredient) {
                Some(idx) => table.set_calorie_density(idx, value)?,
                None => {
                    skipped.insert(ingredient.to_string());
                }
            }
        }
        if !skipped.is_empty() {
            log::warn!("skipped {} table ingredients not in the vocabulary", skipped.len());
        }
        Ok(table)
    }

    pub fn grams_tsv(&self, vocab: &CanonicalVocabulary) -> String {
        let mut out = String::new();
        for (unit, grams) in &self.weights {
            out.push_str(&format!("{GLOBAL_ROW}\t{unit}\t{grams}\n"));
        }
        for ((idx, unit), grams) in &self.per_ingredient {
            out.push_str(&format!("{}\t{unit}\t{grams}\n", vocab.names()[*idx]));
        }
        out
    }

    pub fn calories_tsv(&self, vocab: &CanonicalVocabulary) -> String {
        self.calories
            .iter()
            .map(|(idx, c)| format!("{}\t{c}\n", vocab.names()[*idx]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltMeasure {
    pub measure: String,
    pub serving_weight: f64,
    #[serde(default = "one")]
    pub qty: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemField {
    One(String),
    Many(Vec<String>),
}

/// One nutrition-database response for a raw ingredient name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRecord {
    pub name: String,
    #[serde(default)]
    pub item: Option<ItemField>,
    #[serde(default)]
    pub alt_measures: Vec<AltMeasure>,
    #[serde(default)]
    pub nf_calories: Option<f64>,
    #[serde(default)]
    pub serving_weight_grams: Option<f64>,
    /// Set on manually refined records; skips the name/item agreement check.
    #[serde(default)]
    pub verified: bool,
}

impl MappingRecord {
    /// Distinct returned items.
    pub fn items(&self) -> Vec<String> {
        let all: Vec<String> = match &self.item {
            None => Vec::new(),
            Some(ItemField::One(s)) => vec![s.clone()],
            Some(ItemField::Many(v)) => v.clone(),
        };
        let set: BTreeSet<String> = all
            .into_iter()
            .map(|s| s.trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        set.into_iter().collect()
    }

    pub fn multiplicity(&self) -> usize {
        self.items().len()
    }

    pub fn calorie_density(&self) -> Option<f64> {
        match (self.nf_calories, self.serving_weight_grams) {
            (Some(c), Some(w)) if w > 0.0 && c >= 0.0 => Some(c / w),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    NoResult,
    MultipleMappings,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMapping {
    pub item: String,
    pub alt_measures: Vec<AltMeasure>,
    pub calorie_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MappingResolution {
    pub resolved: BTreeMap<String, ResolvedMapping>,
    pub flagged: BTreeMap<String, FlagReason>,
}

impl MappingResolution {
    /// Folds in a later refinement pass: its resolutions replace earlier flags.
    pub fn merge(mut self, later: MappingResolution) -> MappingResolution {
        for (name, mapping) in later.resolved {
            self.flagged.remove(&name);
            self.resolved.insert(name, mapping);
        }
        for (name, reason) in later.flagged {
            if !self.resolved.contains_key(&name) {
                self.flagged.insert(name, reason);
            }
        }
        self
    }
}

fn same_up_to_number(a: &str, b: &str) -> bool {
    a == b || stem_name(a) == stem_name(b)
}

/// Splits records into those whose single item is the name itself (up to
/// singular/plural form) and those needing manual refinement.
pub fn resolve_mappings(records: &[MappingRecord]) -> Result<MappingResolution, ConversionError> {
    let mut seen = BTreeSet::new();
    let mut out = MappingResolution::default();
    for record in records {
        let name = record.name.trim().to_lowercase();
        if !seen.insert(name.clone()) {
            return Err(ConversionError::DuplicateName(name));
        }
        let items = record.items();
        let reason = match items.len() {
            0 => Some(FlagReason::NoResult),
            1 if record.verified || same_up_to_number(&name, &items[0]) => None,
            1 => Some(FlagReason::Mismatch),
            _ => Some(FlagReason::MultipleMappings),
        };
        match reason {
            Some(reason) => {
                out.flagged.insert(name, reason);
            }
            None => {
                out.resolved.insert(
                    name,
                    ResolvedMapping {
                        item: items[0].clone(),
                        alt_measures: record.alt_measures.clone(),
                        calorie_density: record.calorie_density(),
                    },
                );
            }
        }
    }
    Ok(out)
}

/// The vocabulary unit an external measure string describes, with the factor
/// that turns its weight into grams per unit. Size words describe a bare count
/// (`no_unit`) scaled by their multiplier.
pub fn measure_unit(measure: &str, units: &UnitVocabulary) -> Option<(String, f64)> {
    let tokens = tokenize(measure);
    let first = tokens.first()?;
    match first.as_str() {
        "medium" | "whole" | "each" | "item" => return Some((NO_UNIT.to_string(), 1.0)),
        "large" | "big" => return Some((NO_UNIT.to_string(), 1.0 / 1.2)),
        "small" => return Some((NO_UNIT.to_string(), 1.0 / 0.8)),
        "fl" | "fluid" if tokens.get(1).and_then(|t| units.resolve(t)) == Some("ounce") => {
            return Some(("fluid_ounce".to_string(), 1.0))
        }
        _ => {}
    }
    let unit = units.resolve(first)?;
    (units.is_basic_unit(unit) && units.class_of(unit) != Some(UnitClass::Weight)).then(|| (unit.to_string(), 1.0))
}

fn size_rank(measure: &str) -> u8 {
    match tokenize(measure).first().map(String::as_str) {
        Some("medium" | "whole" | "each" | "item") => 0,
        Some("large" | "big") => 1,
        Some("small") => 2,
        _ => 0,
    }
}

/// Builds per-ingredient conversions and calorie densities from resolved
/// mappings. Several raw names may share a canonical ingredient; the record
/// named exactly like the canonical entry wins, then name order.
pub fn build_conversion_table(
    resolution: &MappingResolution,
    vocab: &CanonicalVocabulary,
    units: &UnitVocabulary,
) -> ConversionTable {
    let mut table = ConversionTable::new();
    let mut ordered: Vec<(&String, &ResolvedMapping, usize)> = resolution
        .resolved
        .iter()
        .filter_map(|(name, m)| vocab.resolve(name).map(|idx| (name, m, idx)))
        .collect();
    ordered.sort_by_key(|(name, _, idx)| (vocab.names()[*idx] != **name, (*name).clone()));

    for (_, mapping, idx) in ordered {
        let mut measures: Vec<&AltMeasure> = mapping.alt_measures.iter().collect();
        measures.sort_by_key(|m| size_rank(&m.measure));
        for m in measures {
            if !(m.serving_weight > 0.0 && m.qty > 0.0) {
                continue;
            }
            if let Some((unit, factor)) = measure_unit(&m.measure, units) {
                if table.grams_per_unit(idx, &unit).is_none() {
                    let _ = table.insert(idx, &unit, m.serving_weight / m.qty * factor);
                }
            }
        }
        if table.calorie_density(idx).is_none() {
            if let Some(c) = mapping.calorie_density {
                let _ = table.set_calorie_density(idx, c);
            }
        }
    }
    table
}

/// A line converted to grams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedLine {
    pub ingredient: String,
    pub index: usize,
    pub grams: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnconvertibleReason {
    /// No grams-per-unit entry for the ingredient and unit.
    MissingEntry,
    /// The stated amount is zero.
    ZeroAmount,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("cannot convert `{ingredient}` in `{unit}` to grams ({reason:?})")]
pub struct Unconvertible {
    pub ingredient: String,
    pub unit: String,
    pub reason: UnconvertibleReason,
}

/// Grams for one line: count × size multiplier × parenthetical amount × grams
/// per unit, where the unit is the parenthetical's when there is one. The range
/// width goes through the same factors.
pub fn convert_line(
    line: &ParsedIngredientLine,
    ingredient: usize,
    table: &ConversionTable,
) -> Result<ConvertedLine, Unconvertible> {
    let (unit, inner) = match &line.parenthetical {
        Some(p) => (p.unit.as_str(), p.quantity.value),
        None => (line.unit.as_str(), Rational64::from_integer(1)),
    };
    let fail = |reason| Unconvertible {
        ingredient: line.ingredient_name.clone(),
        unit: unit.to_string(),
        reason,
    };
    let per_unit = table
        .grams_per_unit(ingredient, unit)
        .ok_or_else(|| fail(UnconvertibleReason::MissingEntry))?;
    let factor = line.size_multiplier * inner;
    let count = line.quantity.value * factor;
    if count.is_zero() {
        return Err(fail(UnconvertibleReason::ZeroAmount));
    }
    let width = line.quantity.range_width * factor;
    Ok(ConvertedLine {
        ingredient: line.ingredient_name.clone(),
        index: ingredient,
        grams: count.to_f64().unwrap_or(f64::NAN) * per_unit,
        range: width.to_f64().unwrap_or(f64::NAN) * per_unit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConversionFilter {
    Kept(Vec<ConvertedLine>),
    Dropped { converted: usize, total: usize },
}

/// Keeps a recipe when at least `min_fraction` of its lines converted;
/// unconvertible lines are removed from kept recipes.
pub fn filter_by_conversion(
    lines: Vec<Result<ConvertedLine, Unconvertible>>,
    min_fraction: f64,
) -> Result<ConversionFilter, ConversionError> {
    if !(0.0..=1.0).contains(&min_fraction) {
        return Err(ConversionError::BadFraction(min_fraction));
    }
    let total = lines.len();
    let converted: Vec<ConvertedLine> = lines.into_iter().filter_map(Result::ok).collect();
    if total > 0 && !converted.is_empty() && converted.len() as f64 / total as f64 >= min_fraction {
        Ok(ConversionFilter::Kept(converted))
    } else {
        Ok(ConversionFilter::Dropped {
            converted: converted.len(),
            total,
        })
    }
}
