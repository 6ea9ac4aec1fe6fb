//! File-based pipeline stages.
//!
//! Each stage reads its inputs, writes its outputs and returns a
//! [`RunManifest`] recording flags, seed and SHA-256 digests. Paths in the
//! manifest are file names only, so a run reproduces byte for byte in any
//! output directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amount_models::{self, AdamConfig, HeadKind, HeadParams, ModelError, Sample, TrainConfig};
use crate::canonicalizer::{
    apply_decisions, compute_coverage, filter_by_coverage, name_frequencies, propose_all, render_frequencies, top_n,
    CanonError, CanonicalVocabulary, DecisionLedger, EmbeddingTable, MergeProposal,
};
use crate::io::{self, FeatureRecord, IoError, PredictionRecord, RawRecipe};
use crate::metrics_eval::{
    evaluate_dataset, rce_histogram, retrieve_all, EvalOptions, MetricsError, MetricsReport, OutOfRange, METRIC_TOTAL,
};
use crate::quantity_parser::{filter_recipe_units, ParsedRecipe, RecipeFilter};
use crate::unit_converter::{
    build_conversion_table, convert_line, filter_by_conversion, resolve_mappings, ConversionError, ConversionFilter,
    ConversionTable, ConvertedLine, MappingRecord, Unconvertible, UnconvertibleReason,
};
use crate::units::{UnitVocabulary, VocabularyError};
use crate::vectorizer::{dense, sparse, vectorize_recipe, RecipeVector, VectorError, VectorRecord};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Units(#[from] VocabularyError),
    #[error(transparent)]
    Canon(#[from] CanonError),
    #[error(transparent)]
    Conversion(#[from] ConversionError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("split ratios must be nonnegative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("no features for recipe `{0}`")]
    MissingFeatures(String),
    #[error("bad proposal on line {line}: {message}")]
    MalformedProposal { line: usize, message: String },
    #[error("bad model file: {0}")]
    BadModel(String),
    #[error("bad config: {0}")]
    Config(String),
}

impl PipelineError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Io(IoError::Io { .. }) => "io_error",
            PipelineError::Io(IoError::MalformedJson { .. }) => "malformed_json",
            PipelineError::Units(_) => "unit_vocabulary",
            PipelineError::Canon(CanonError::UnknownProposal { .. }) => "unknown_proposal",
            PipelineError::Canon(_) => "canonicalize",
            PipelineError::Conversion(_) => "conversion",
            PipelineError::Vector(_) => "vectorize",
            PipelineError::Model(_) => "model",
            PipelineError::Metrics(MetricsError::IdMismatch(_)) => "id_mismatch",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::BadRatios(_) => "bad_ratios",
            PipelineError::MissingFeatures(_) => "missing_features",
            PipelineError::MalformedProposal { .. } => "malformed_proposal",
            PipelineError::BadModel(_) => "bad_model",
            PipelineError::Config(_) => "config",
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub canonicalize: CanonicalizeConfig,
    pub convert: ConvertConfig,
    pub split: SplitConfig,
    pub train: TrainSection,
    pub retrieve: RetrieveConfig,
    pub evaluate: EvaluateConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&io::read_text(path)?).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CanonicalizeConfig {
    pub threshold: f64,
    pub min_coverage: f64,
    pub top_n: usize,
}

impl Default for CanonicalizeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.85,
            min_coverage: 0.8,
            top_n: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertConfig {
    pub min_fraction: f64,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        Self { min_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.6, 0.2, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub top_k: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            lr: AdamConfig::default().lr,
            top_k: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrieveConfig {
    pub pool_size: usize,
}

impl Default for RetrieveConfig {
    fn default() -> Self {
        Self { pool_size: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub bins: usize,
    pub out_of_range: OutOfRange,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            out_of_range: OutOfRange::ToValue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| IoError::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self {
            path: file_name(path),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub seed: Option<u64>,
    pub flags: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            seed: None,
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    fn inputs(mut self, paths: &[&Path]) -> Result<Self> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(self)
    }

    fn outputs(mut self, paths: &[&Path]) -> Result<Self> {
        for p in paths {
            self.outputs.push(FileDigest::of(p)?);
        }
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(io::write_json(path, self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub id: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropLog {
    pub stage: String,
    pub total: usize,
    pub kept: usize,
    pub dropped: usize,
    pub drop_fraction: f64,
    pub entries: Vec<DropEntry>,
}

impl DropLog {
    fn new(stage: &str, total: usize, entries: Vec<DropEntry>) -> Self {
        let dropped = entries.len();
        Self {
            stage: stage.to_string(),
            total,
            kept: total - dropped,
            dropped,
            drop_fraction: if total == 0 { 0.0 } else { dropped as f64 / total as f64 },
            entries,
        }
    }
}

pub fn load_units(path: Option<&Path>) -> Result<UnitVocabulary> {
    match path {
        Some(p) => Ok(UnitVocabulary::parse(&io::read_text(p)?)?),
        None => Ok(UnitVocabulary::bundled()),
    }
}

/// Parses every recipe; recipes with unknown unit words or without any
/// quantity-bearing line are dropped.
pub fn parse_recipes(recipes: &[RawRecipe], units: &UnitVocabulary) -> (Vec<ParsedRecipe>, DropLog) {
    let mut kept = Vec::new();
    let mut drops = Vec::new();
    for r in recipes {
        match filter_recipe_units(&r.ingredients, units) {
            Ok(RecipeFilter::Kept(lines)) => kept.push(ParsedRecipe {
                id: r.id.clone(),
                title: r.title.clone(),
                lines,
            }),
            Ok(RecipeFilter::Dropped { line, words }) => drops.push(DropEntry {
                id: r.id.clone(),
                reason: "unknown_unit_words".into(),
                detail: format!("line {}: {}", line + 1, words.join(" ")),
            }),
            Err(_) => drops.push(DropEntry {
                id: r.id.clone(),
                reason: "empty_recipe".into(),
                detail: String::new(),
            }),
        }
    }
    (kept, DropLog::new("parse", recipes.len(), drops))
}

pub struct ParseArgs<'a> {
    pub input: &'a Path,
    pub units: Option<&'a Path>,
    pub out: &'a Path,
    pub drops: &'a Path,
}

pub fn cmd_parse(a: &ParseArgs) -> Result<(RunManifest, DropLog)> {
    let units = load_units(a.units)?;
    let recipes: Vec<RawRecipe> = io::read_jsonl(a.input)?;
    let (parsed, log) = parse_recipes(&recipes, &units);
    io::write_jsonl(a.out, &parsed)?;
    io::write_json(a.drops, &log)?;
    let mut inputs = vec![a.input];
    inputs.extend(a.units);
    let m = RunManifest::new("parse").inputs(&inputs)?.outputs(&[a.out, a.drops])?;
    Ok((m, log))
}

/// Raw name to external item for names whose lookup resolved cleanly.
pub fn mapping_items(records: &[MappingRecord]) -> Result<BTreeMap<String, String>> {
    let resolution = resolve_mappings(records)?;
    Ok(resolution
        .resolved
        .into_iter()
        .map(|(name, m)| (name, m.item))
        .collect())
}

/// Name counts, most frequent first.
pub type Frequencies = Vec<(String, u64)>;

pub fn propose_stage(
    parsed: &[ParsedRecipe],
    embeddings: &EmbeddingTable,
    mappings: &[MappingRecord],
    config: &CanonicalizeConfig,
) -> Result<(Frequencies, Vec<MergeProposal>)> {
    let frequencies = top_n(&name_frequencies(parsed), config.top_n);
    let names: Vec<&str> = frequencies.iter().map(|(n, _)| n.as_str()).collect();
    let proposals = propose_all(&names, embeddings, &mapping_items(mappings)?, config.threshold)?;
    Ok((frequencies, proposals))
}

pub fn render_proposals(proposals: &[MergeProposal]) -> String {
    proposals.iter().map(|p| p.to_tsv() + "\n").collect()
}

pub fn parse_proposals(text: &str) -> Result<Vec<MergeProposal>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            MergeProposal::from_tsv(l).map_err(|message| PipelineError::MalformedProposal { line: n + 1, message })
        })
        .collect()
}

pub struct ProposeArgs<'a> {
    pub parsed: &'a Path,
    pub embeddings: &'a Path,
    pub mappings: &'a Path,
    pub frequencies_out: &'a Path,
    pub proposals_out: &'a Path,
    pub draft_ledger_out: Option<&'a Path>,
}

pub fn cmd_propose(a: &ProposeArgs, config: &CanonicalizeConfig) -> Result<RunManifest> {
    let parsed: Vec<ParsedRecipe> = io::read_jsonl(a.parsed)?;
    let embeddings = EmbeddingTable::parse(&io::read_text(a.embeddings)?)?;
    let mappings: Vec<MappingRecord> = io::read_jsonl(a.mappings)?;
    let (frequencies, proposals) = propose_stage(&parsed, &embeddings, &mappings, config)?;
    io::write_text(a.frequencies_out, &render_frequencies(&frequencies))?;
    io::write_text(a.proposals_out, &render_proposals(&proposals))?;
    let mut outputs = vec![a.frequencies_out, a.proposals_out];
    if let Some(draft) = a.draft_ledger_out {
        io::write_text(draft, &DecisionLedger::draft(&proposals))?;
        outputs.push(draft);
    }
    RunManifest::new("canonicalize-propose")
        .flag("threshold", config.threshold)
        .flag("top_n", config.top_n)
        .inputs(&[a.parsed, a.embeddings, a.mappings])?
        .outputs(&outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub id: String,
    pub covered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub recipes: usize,
    pub mean: f64,
    /// The mean as an exact fraction `p/q`.
    pub mean_exact: String,
    pub min_coverage: f64,
    pub per_recipe: Vec<CoverageRow>,
}

pub struct ApplyOutcome {
    pub vocabulary: CanonicalVocabulary,
    pub coverage: CoverageReport,
    pub kept: Vec<ParsedRecipe>,
    pub drops: DropLog,
}

/// Builds the vocabulary over the `top_n` most frequent names, measures
/// coverage of every recipe and drops those below `min_coverage`.
pub fn apply_stage(
    parsed: &[ParsedRecipe],
    proposals: &[MergeProposal],
    ledger: &DecisionLedger,
    config: &CanonicalizeConfig,
) -> Result<ApplyOutcome> {
    let frequencies = top_n(&name_frequencies(parsed), config.top_n);
    let in_top: BTreeSet<&str> = frequencies.iter().map(|(n, _)| n.as_str()).collect();
    let proposals: Vec<MergeProposal> = proposals
        .iter()
        .filter(|p| in_top.contains(p.source.as_str()) && in_top.contains(p.target.as_str()))
        .cloned()
        .collect();
    let vocabulary = apply_decisions(&frequencies, &proposals, ledger)?;

    let coverage = if parsed.is_empty() {
        CoverageReport {
            recipes: 0,
            mean: 0.0,
            mean_exact: "0".into(),
            min_coverage: config.min_coverage,
            per_recipe: Vec::new(),
        }
    } else {
        let names: Vec<Vec<&str>> = parsed
            .iter()
            .map(|r| r.lines.iter().map(|l| l.ingredient_name.as_str()).collect())
            .collect();
        let c = compute_coverage(&names, &vocabulary)?;
        CoverageReport {
            recipes: parsed.len(),
            mean: c.mean,
            mean_exact: c.mean_exact().to_string(),
            min_coverage: config.min_coverage,
            per_recipe: parsed
                .iter()
                .zip(&c.per_recipe)
                .map(|(r, &(covered, total))| CoverageRow {
                    id: r.id.clone(),
                    covered,
                    total,
                })
                .collect(),
        }
    };
    let filtered = filter_by_coverage(parsed, &vocabulary, config.min_coverage)?;
    let entries = filtered
        .dropped
        .iter()
        .map(|(id, cov)| DropEntry {
            id: id.clone(),
            reason: "low_coverage".into(),
            detail: format!("{cov:.4}"),
        })
        .collect();
    Ok(ApplyOutcome {
        vocabulary,
        coverage,
        kept: filtered.kept,
        drops: DropLog::new("canonicalize-apply", parsed.len(), entries),
    })
}

pub struct ApplyArgs<'a> {
    pub parsed: &'a Path,
    pub proposals: &'a Path,
    pub ledger: &'a Path,
    pub vocabulary_out: &'a Path,
    pub coverage_out: &'a Path,
    pub recipes_out: &'a Path,
    pub drops: &'a Path,
}

pub fn cmd_apply(a: &ApplyArgs, config: &CanonicalizeConfig) -> Result<RunManifest> {
    let parsed: Vec<ParsedRecipe> = io::read_jsonl(a.parsed)?;
    let proposals = parse_proposals(&io::read_text(a.proposals)?)?;
    let ledger = DecisionLedger::parse(&io::read_text(a.ledger)?)?;
    let out = apply_stage(&parsed, &proposals, &ledger, config)?;
    io::write_json(a.vocabulary_out, &out.vocabulary)?;
    io::write_json(a.coverage_out, &out.coverage)?;
    io::write_jsonl(a.recipes_out, &out.kept)?;
    io::write_json(a.drops, &out.drops)?;
    RunManifest::new("canonicalize-apply")
        .flag("min_coverage", config.min_coverage)
        .flag("top_n", config.top_n)
        .inputs(&[a.parsed, a.proposals, a.ledger])?
        .outputs(&[a.vocabulary_out, a.coverage_out, a.recipes_out, a.drops])
}

pub struct TablesArgs<'a> {
    pub mappings: &'a Path,
    pub vocabulary: &'a Path,
    pub units: Option<&'a Path>,
    pub grams_out: &'a Path,
    pub calories_out: &'a Path,
}

/// Conversion and calorie tables from nutrition-database mapping records.
pub fn cmd_tables(a: &TablesArgs) -> Result<RunManifest> {
    let units = load_units(a.units)?;
    let vocab: CanonicalVocabulary = io::read_json(a.vocabulary)?;
    let mappings: Vec<MappingRecord> = io::read_jsonl(a.mappings)?;
    let resolution = resolve_mappings(&mappings)?;
    for (name, reason) in &resolution.flagged {
        log::info!("mapping for `{name}` needs refinement: {reason:?}");
    }
    let table = build_conversion_table(&resolution, &vocab, &units);
    io::write_text(a.grams_out, &table.grams_tsv(&vocab))?;
    io::write_text(a.calories_out, &table.calories_tsv(&vocab))?;
    let mut inputs = vec![a.mappings, a.vocabulary];
    inputs.extend(a.units);
    RunManifest::new("tables")
        .inputs(&inputs)?
        .outputs(&[a.grams_out, a.calories_out])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvertedRecipe {
    pub id: String,
    pub lines: Vec<ConvertedLine>,
}

pub fn convert_recipes(
    recipes: &[ParsedRecipe],
    vocab: &CanonicalVocabulary,
    table: &ConversionTable,
    min_fraction: f64,
) -> Result<(Vec<ConvertedRecipe>, DropLog)> {
    let mut kept = Vec::new();
    let mut drops = Vec::new();
    for r in recipes {
        let lines: Vec<_> = r
            .lines
            .iter()
            .map(|line| match vocab.resolve(&line.ingredient_name) {
                Some(idx) => convert_line(line, idx, table),
                None => Err(Unconvertible {
                    ingredient: line.ingredient_name.clone(),
                    unit: line.unit.clone(),
                    reason: UnconvertibleReason::MissingEntry,
                }),
            })
            .collect();
        match filter_by_conversion(lines, min_fraction)? {
            ConversionFilter::Kept(lines) => kept.push(ConvertedRecipe {
                id: r.id.clone(),
                lines,
            }),
            ConversionFilter::Dropped { converted, total } => drops.push(DropEntry {
                id: r.id.clone(),
                reason: "low_conversion".into(),
                detail: format!("{converted}/{total}"),
            }),
        }
    }
    Ok((kept, DropLog::new("convert", recipes.len(), drops)))
}

pub struct ConvertArgs<'a> {
    pub input: &'a Path,
    pub vocabulary: &'a Path,
    pub grams: &'a Path,
    pub calories: &'a Path,
    pub out: &'a Path,
    pub drops: &'a Path,
}

pub fn cmd_convert(a: &ConvertArgs, config: &ConvertConfig) -> Result<RunManifest> {
    let recipes: Vec<ParsedRecipe> = io::read_jsonl(a.input)?;
    let vocab: CanonicalVocabulary = io::read_json(a.vocabulary)?;
    let table = ConversionTable::from_tsv(&io::read_text(a.grams)?, &io::read_text(a.calories)?, &vocab)?;
    let (converted, log) = convert_recipes(&recipes, &vocab, &table, config.min_fraction)?;
    io::write_jsonl(a.out, &converted)?;
    io::write_json(a.drops, &log)?;
    RunManifest::new("convert")
        .flag("min_fraction", config.min_fraction)
        .inputs(&[a.input, a.vocabulary, a.grams, a.calories])?
        .outputs(&[a.out, a.drops])
}

pub fn vectorize_recipes(recipes: &[ConvertedRecipe], vocab: &CanonicalVocabulary) -> Result<Vec<RecipeVector>> {
    recipes
        .iter()
        .map(|r| Ok(vectorize_recipe(&r.id, &r.lines, vocab)?))
        .collect()
}

pub fn cmd_vectorize(input: &Path, vocabulary: &Path, out: &Path) -> Result<RunManifest> {
    let recipes: Vec<ConvertedRecipe> = io::read_jsonl(input)?;
    let vocab: CanonicalVocabulary = io::read_json(vocabulary)?;
    let vectors = vectorize_recipes(&recipes, &vocab)?;
    let records: Vec<VectorRecord> = vectors.iter().map(RecipeVector::to_record).collect();
    io::write_jsonl(out, &records)?;
    RunManifest::new("vectorize")
        .inputs(&[input, vocabulary])?
        .outputs(&[out])
}

/// Shuffles indices `0..n` with `seed` and cuts them into train, validation
/// and test. Validation and test get the floor of their share; the remainder
/// goes to train.
pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(PipelineError::BadRatios(ratios));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let share = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
    let n_val = share(ratios[1]);
    let n_test = share(ratios[2]);
    let n_train = n - n_val - n_test;
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok([order, val, test])
}

pub struct SplitArgs<'a> {
    pub input: &'a Path,
    pub train_out: &'a Path,
    pub val_out: &'a Path,
    pub test_out: &'a Path,
}

pub fn cmd_split(a: &SplitArgs, config: &SplitConfig, seed: u64) -> Result<RunManifest> {
    let records: Vec<VectorRecord> = io::read_jsonl(a.input)?;
    let parts = split_indices(records.len(), config.ratios, seed)?;
    for (part, path) in parts.iter().zip([a.train_out, a.val_out, a.test_out]) {
        let chosen: Vec<&VectorRecord> = part.iter().map(|&i| &records[i]).collect();
        io::write_jsonl(path, &chosen)?;
    }
    RunManifest::new("split")
        .seed(seed)
        .flag("ratios", format!("{:?}", config.ratios))
        .inputs(&[a.input])?
        .outputs(&[a.train_out, a.val_out, a.test_out])
}

fn feature_map(records: Vec<FeatureRecord>) -> HashMap<String, Vec<f64>> {
    records.into_iter().map(|r| (r.id, r.features)).collect()
}

fn vector_dim(records: &[VectorRecord]) -> usize {
    records
        .iter()
        .flat_map(|r| r.amounts.iter().chain(&r.ranges))
        .map(|(i, _)| i + 1)
        .max()
        .unwrap_or(0)
}

/// Training samples with targets normalized to sum 1.
pub fn samples(vectors: &[RecipeVector], features: &HashMap<String, Vec<f64>>) -> Result<Vec<Sample>> {
    vectors
        .iter()
        .map(|v| {
            let features = features
                .get(&v.id)
                .ok_or_else(|| PipelineError::MissingFeatures(v.id.clone()))?;
            let normalized = crate::vectorizer::normalize_amounts(v, 1.0)?;
            Ok(Sample {
                id: v.id.clone(),
                features: features.clone(),
                target: normalized.amounts,
            })
        })
        .collect()
}

fn read_vectors(path: &Path, dim: usize) -> Result<Vec<RecipeVector>> {
    let records: Vec<VectorRecord> = io::read_jsonl(path)?;
    records.iter().map(|r| Ok(RecipeVector::from_record(r, dim)?)).collect()
}

fn vocabulary_len(path: &Path) -> Result<usize> {
    let vocab: CanonicalVocabulary = io::read_json(path)?;
    Ok(vocab.len())
}

pub struct TrainArgs<'a> {
    pub features: &'a Path,
    pub train: &'a Path,
    pub validation: Option<&'a Path>,
    pub vocabulary: Option<&'a Path>,
    pub head: HeadKind,
    pub model_out: &'a Path,
    pub log_out: Option<&'a Path>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub head: HeadKind,
    pub epochs: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

pub fn cmd_train(a: &TrainArgs, config: &TrainSection, seed: u64) -> Result<RunManifest> {
    let features = feature_map(io::read_jsonl(a.features)?);
    let train_records: Vec<VectorRecord> = io::read_jsonl(a.train)?;
    let val_records: Vec<VectorRecord> = match a.validation {
        Some(p) => io::read_jsonl(p)?,
        None => Vec::new(),
    };
    let dim = match a.vocabulary {
        Some(p) => vocabulary_len(p)?,
        None => vector_dim(&train_records).max(vector_dim(&val_records)),
    };
    let to_vectors = |records: &[VectorRecord]| -> Result<Vec<RecipeVector>> {
        records.iter().map(|r| Ok(RecipeVector::from_record(r, dim)?)).collect()
    };
    let train_set = samples(&to_vectors(&train_records)?, &features)?;
    let val_set = samples(&to_vectors(&val_records)?, &features)?;
    let train_config = TrainConfig {
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed,
        adam: AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    };
    let outcome = amount_models::train(&train_set, &val_set, a.head, &train_config)?;
    io::write_text(a.model_out, &(outcome.params.to_json() + "\n"))?;
    let mut outputs = vec![a.model_out];
    if let Some(log_path) = a.log_out {
        io::write_json(
            log_path,
            &TrainLog {
                head: a.head,
                epochs: config.epochs,
                best_epoch: outcome.best_epoch,
                train_loss: outcome.train_loss,
                val_loss: outcome.val_loss,
            },
        )?;
        outputs.push(log_path);
    }
    let mut inputs = vec![a.features, a.train];
    inputs.extend(a.validation);
    inputs.extend(a.vocabulary);
    RunManifest::new("train")
        .seed(seed)
        .flag("head", a.head)
        .flag("epochs", config.epochs)
        .flag("batch_size", config.batch_size)
        .flag("lr", config.lr)
        .inputs(&inputs)?
        .outputs(&outputs)
}

pub fn load_model(path: &Path) -> Result<HeadParams> {
    HeadParams::from_json(&io::read_text(path)?)
        .map_err(|e| PipelineError::BadModel(format!("{}: {e}", path.display())))
}

pub struct PredictArgs<'a> {
    pub model: &'a Path,
    pub features: &'a Path,
    /// Restricts prediction to the ids of this vector file, in its order.
    pub ids_from: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn cmd_predict(a: &PredictArgs, top_k: Option<usize>) -> Result<RunManifest> {
    let params = load_model(a.model)?;
    let records: Vec<FeatureRecord> = io::read_jsonl(a.features)?;
    let selected: Vec<FeatureRecord> = match a.ids_from {
        Some(p) => {
            let wanted: Vec<VectorRecord> = io::read_jsonl(p)?;
            let by_id = feature_map(records);
            wanted
                .into_iter()
                .map(|w| {
                    let features = by_id
                        .get(&w.id)
                        .cloned()
                        .ok_or_else(|| PipelineError::MissingFeatures(w.id.clone()))?;
                    Ok(FeatureRecord { id: w.id, features })
                })
                .collect::<Result<_>>()?
        }
        None => records,
    };
    // the sparse head keeps every positive output unless asked otherwise
    let k = match params.kind {
        HeadKind::Dense => top_k.or(Some(10)),
        HeadKind::Sparse => top_k,
    };
    let mut out = Vec::with_capacity(selected.len());
    for r in &selected {
        let v = amount_models::predict(&params, &r.features, k, METRIC_TOTAL)?.into_vec();
        out.push(PredictionRecord {
            id: r.id.clone(),
            amounts: sparse(&v),
        });
    }
    io::write_jsonl(a.out, &out)?;
    let mut inputs = vec![a.model, a.features];
    inputs.extend(a.ids_from);
    RunManifest::new("predict")
        .flag("top_k", k.map_or("all".to_string(), |k| k.to_string()))
        .inputs(&inputs)?
        .outputs(&[a.out])
}

pub struct RetrieveArgs<'a> {
    pub features: &'a Path,
    pub queries: &'a Path,
    pub pool: &'a Path,
    pub vocabulary: Option<&'a Path>,
    pub include_gt: bool,
    pub out: &'a Path,
}

pub fn cmd_retrieve(a: &RetrieveArgs, config: &RetrieveConfig, seed: u64) -> Result<RunManifest> {
    let features = feature_map(io::read_jsonl(a.features)?);
    let query_records: Vec<VectorRecord> = io::read_jsonl(a.queries)?;
    let pool_records: Vec<VectorRecord> = io::read_jsonl(a.pool)?;
    let dim = match a.vocabulary {
        Some(p) => vocabulary_len(p)?,
        None => vector_dim(&query_records).max(vector_dim(&pool_records)),
    };
    let attach = |records: &[VectorRecord]| -> Result<Vec<(Vec<f64>, RecipeVector)>> {
        records
            .iter()
            .map(|r| {
                let f = features
                    .get(&r.id)
                    .ok_or_else(|| PipelineError::MissingFeatures(r.id.clone()))?;
                Ok((f.clone(), RecipeVector::from_record(r, dim)?))
            })
            .collect()
    };
    let queries = attach(&query_records)?;
    let pool = attach(&pool_records)?;
    let predictions = retrieve_all(&queries, &pool, config.pool_size, a.include_gt, seed)?;
    let out: Vec<PredictionRecord> = predictions
        .into_iter()
        .map(|(id, v)| PredictionRecord {
            id,
            amounts: sparse(&v),
        })
        .collect();
    io::write_jsonl(a.out, &out)?;
    let mut inputs = vec![a.features, a.queries, a.pool];
    inputs.extend(a.vocabulary);
    RunManifest::new("retrieve")
        .seed(seed)
        .flag("include_gt", a.include_gt)
        .flag("pool_size", config.pool_size)
        .inputs(&inputs)?
        .outputs(&[a.out])
}

/// Calorie densities per canonical index from the calorie TSV.
pub fn calorie_vector(calories_tsv: &str, vocab: &CanonicalVocabulary) -> Result<Vec<f64>> {
    Ok(ConversionTable::from_tsv("", calories_tsv, vocab)?.calorie_vector(vocab.len()))
}

pub struct EvaluateArgs<'a> {
    pub predictions: &'a Path,
    pub references: &'a Path,
    pub vocabulary: &'a Path,
    pub calories: &'a Path,
    pub report_out: &'a Path,
    pub histogram_out: &'a Path,
}

pub fn cmd_evaluate(a: &EvaluateArgs, config: &EvaluateConfig) -> Result<(RunManifest, MetricsReport)> {
    let vocab: CanonicalVocabulary = io::read_json(a.vocabulary)?;
    let calories = calorie_vector(&io::read_text(a.calories)?, &vocab)?;
    let references = read_vectors(a.references, vocab.len())?;
    let records: Vec<PredictionRecord> = io::read_jsonl(a.predictions)?;
    let predictions = records
        .iter()
        .map(|r| Ok((r.id.clone(), dense(&r.amounts, vocab.len())?)))
        .collect::<Result<Vec<_>>>()?;
    let options = EvalOptions {
        total: METRIC_TOTAL,
        out_of_range: config.out_of_range,
    };
    let report = evaluate_dataset(&predictions, &references, &calories, &options)?;
    io::write_json(a.report_out, &report)?;
    let csv = match rce_histogram(&report, config.bins) {
        Ok(h) => h.to_csv(),
        Err(MetricsError::EmptyReport) => "bin_low,bin_high,count\n".to_string(),
        Err(e) => return Err(e.into()),
    };
    io::write_text(a.histogram_out, &csv)?;
    let m = RunManifest::new("evaluate")
        .flag("bins", config.bins)
        .flag("out_of_range", format!("{:?}", config.out_of_range))
        .inputs(&[a.predictions, a.references, a.vocabulary, a.calories])?
        .outputs(&[a.report_out, a.histogram_out])?;
    Ok((m, report))
}

/// Markdown table of (mean, std) per metric, one row per named report.
pub fn summary_table(reports: &[(String, MetricsReport)]) -> String {
    let mut out = String::from("| method | recall | iou | l1 error | rce |\n|---|---|---|---|---|\n");
    for (name, r) in reports {
        let cell = |s: &crate::metrics_eval::Summary| format!("{:.3} ± {:.3}", s.mean, s.std);
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {} |\n",
            cell(&r.recall),
            cell(&r.iou),
            cell(&r.l1_error),
            cell(&r.rce)
        ));
    }
    out
}

pub struct ReportArgs<'a> {
    pub reports: &'a [PathBuf],
    pub summary_out: &'a Path,
    /// SVG histogram of the first report.
    pub plot_out: Option<&'a Path>,
}

pub fn cmd_report(a: &ReportArgs, config: &EvaluateConfig) -> Result<RunManifest> {
    let mut named = Vec::with_capacity(a.reports.len());
    for p in a.reports {
        let stem = p
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let name = stem.strip_prefix("report_").unwrap_or(&stem).to_string();
        named.push((name, io::read_json::<MetricsReport>(p)?));
    }
    io::write_text(a.summary_out, &summary_table(&named))?;
    let mut outputs = vec![a.summary_out];
    if let (Some(plot), Some((_, first))) = (a.plot_out, named.first()) {
        let svg = match rce_histogram(first, config.bins) {
            Ok(h) => h.to_svg(),
            Err(MetricsError::EmptyReport) => "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n".to_string(),
            Err(e) => return Err(e.into()),
        };
        io::write_text(plot, &svg)?;
        outputs.push(plot);
    }
    let inputs: Vec<&Path> = a.reports.iter().map(PathBuf::as_path).collect();
    RunManifest::new("report")
        .flag("bins", config.bins)
        .inputs(&inputs)?
        .outputs(&outputs)
}

pub struct RunAllArgs<'a> {
    pub recipes: &'a Path,
    pub embeddings: &'a Path,
    pub mappings: &'a Path,
    pub ledger: &'a Path,
    pub features: &'a Path,
    pub units: Option<&'a Path>,
    pub out_dir: &'a Path,
}

/// Every stage in order, writing into `out_dir` with one manifest per stage
/// under `out_dir/manifests`. Returns the manifests.
pub fn run_all(a: &RunAllArgs, config: &Config, seed: u64) -> Result<Vec<RunManifest>> {
    let p = |name: &str| a.out_dir.join(name);
    let mut manifests = Vec::new();

    let (m, _) = cmd_parse(&ParseArgs {
        input: a.recipes,
        units: a.units,
        out: &p("parsed.jsonl"),
        drops: &p("parse_drops.json"),
    })?;
    manifests.push(m);
    manifests.push(cmd_propose(
        &ProposeArgs {
            parsed: &p("parsed.jsonl"),
            embeddings: a.embeddings,
            mappings: a.mappings,
            frequencies_out: &p("frequencies.tsv"),
            proposals_out: &p("proposals.tsv"),
            draft_ledger_out: Some(&p("ledger.draft")),
        },
        &config.canonicalize,
    )?);
    manifests.push(cmd_apply(
        &ApplyArgs {
            parsed: &p("parsed.jsonl"),
            proposals: &p("proposals.tsv"),
            ledger: a.ledger,
            vocabulary_out: &p("vocabulary.json"),
            coverage_out: &p("coverage.json"),
            recipes_out: &p("canonical.jsonl"),
            drops: &p("coverage_drops.json"),
        },
        &config.canonicalize,
    )?);
    manifests.push(cmd_tables(&TablesArgs {
        mappings: a.mappings,
        vocabulary: &p("vocabulary.json"),
        units: a.units,
        grams_out: &p("grams.tsv"),
        calories_out: &p("calories.tsv"),
    })?);
    manifests.push(cmd_convert(
        &ConvertArgs {
            input: &p("canonical.jsonl"),
            vocabulary: &p("vocabulary.json"),
            grams: &p("grams.tsv"),
            calories: &p("calories.tsv"),
            out: &p("converted.jsonl"),
            drops: &p("convert_drops.json"),
        },
        &config.convert,
    )?);
    manifests.push(cmd_vectorize(
        &p("converted.jsonl"),
        &p("vocabulary.json"),
        &p("vectors.jsonl"),
    )?);
    manifests.push(cmd_split(
        &SplitArgs {
            input: &p("vectors.jsonl"),
            train_out: &p("train.jsonl"),
            val_out: &p("val.jsonl"),
            test_out: &p("test.jsonl"),
        },
        &config.split,
        seed,
    )?);

    let mut reports = Vec::new();
    for head in [HeadKind::Dense, HeadKind::Sparse] {
        let model = p(&format!("model_{head}.json"));
        manifests.push(cmd_train(
            &TrainArgs {
                features: a.features,
                train: &p("train.jsonl"),
                validation: Some(&p("val.jsonl")),
                vocabulary: Some(&p("vocabulary.json")),
                head,
                model_out: &model,
                log_out: Some(&p(&format!("train_log_{head}.json"))),
            },
            &config.train,
            seed,
        )?);
        let top_k = (head == HeadKind::Dense).then_some(config.train.top_k);
        let predictions = p(&format!("predictions_{head}.jsonl"));
        manifests.push(cmd_predict(
            &PredictArgs {
                model: &model,
                features: a.features,
                ids_from: Some(&p("test.jsonl")),
                out: &predictions,
            },
            top_k,
        )?);
        reports.push(format!("{head}"));
    }
    for (name, include_gt) in [("retrieval_with_gt", true), ("retrieval_without_gt", false)] {
        manifests.push(cmd_retrieve(
            &RetrieveArgs {
                features: a.features,
                queries: &p("test.jsonl"),
                pool: &p("test.jsonl"),
                vocabulary: Some(&p("vocabulary.json")),
                include_gt,
                out: &p(&format!("predictions_{name}.jsonl")),
            },
            &config.retrieve,
            seed,
        )?);
        reports.push(name.to_string());
    }
    let mut report_paths = Vec::new();
    for name in &reports {
        let report = p(&format!("report_{name}.json"));
        let (m, _) = cmd_evaluate(
            &EvaluateArgs {
                predictions: &p(&format!("predictions_{name}.jsonl")),
                references: &p("test.jsonl"),
                vocabulary: &p("vocabulary.json"),
                calories: &p("calories.tsv"),
                report_out: &report,
                histogram_out: &p(&format!("rce_histogram_{name}.csv")),
            },
            &config.evaluate,
        )?;
        manifests.push(m);
        report_paths.push(report);
    }
    manifests.push(cmd_report(
        &ReportArgs {
            reports: &report_paths,
            summary_out: &p("summary.md"),
            plot_out: Some(&p("rce_histogram.svg")),
        },
        &config.evaluate,
    )?);

    for (i, m) in manifests.iter().enumerate() {
        m.write(&a.out_dir.join("manifests").join(format!("{i:02}_{}.json", m.stage)))?;
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_and_determinism() {
        let [train, val, test] = split_indices(10, [0.6, 0.2, 0.2], 7).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (6, 2, 2));
        let mut all: Vec<usize> = train.iter().chain(&val).chain(&test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, [0.6, 0.2, 0.2], 7).unwrap(), [train, val, test]);

        let [train, val, test] = split_indices(19, [0.6, 0.2, 0.2], 0).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (13, 3, 3));
        let [train, val, test] = split_indices(0, [0.6, 0.2, 0.2], 0).unwrap();
        assert!(train.is_empty() && val.is_empty() && test.is_empty());
        assert!(matches!(
            split_indices(5, [0.5, 0.2, 0.2], 0),
            Err(PipelineError::BadRatios(_))
        ));
        assert!(matches!(
            split_indices(5, [1.2, -0.2, 0.0], 0),
            Err(PipelineError::BadRatios(_))
        ));
    }

    #[test]
    fn config_defaults_and_overrides() {
        let c: Config = toml::from_str("[train]\nepochs = 5\n[split]\nratios = [0.8, 0.1, 0.1]\n").unwrap();
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.split.ratios, [0.8, 0.1, 0.1]);
        assert_eq!(c.canonicalize, CanonicalizeConfig::default());
        assert!(toml::from_str::<Config>("[train]\nepoch = 5\n").is_err());
        let c: Config = toml::from_str("[evaluate]\nout_of_range = \"to_edge\"\n").unwrap();
        assert_eq!(c.evaluate.out_of_range, OutOfRange::ToEdge);
    }

    #[test]
    fn drop_log_fraction() {
        let log = DropLog::new(
            "parse",
            20,
            vec![DropEntry {
                id: "x".into(),
                reason: "r".into(),
                detail: String::new(),
            }],
        );
        assert_eq!((log.kept, log.dropped, log.drop_fraction), (19, 1, 0.05));
        assert_eq!(DropLog::new("parse", 0, vec![]).drop_fraction, 0.0);
    }

    #[test]
    fn parse_drops_unknown_units_and_empty_recipes() {
        let recipes = vec![
            RawRecipe {
                id: "a".into(),
                title: String::new(),
                ingredients: vec!["2 cups flour".into()],
            },
            RawRecipe {
                id: "b".into(),
                title: String::new(),
                ingredients: vec!["1 smidgen of salt".into()],
            },
            RawRecipe {
                id: "c".into(),
                title: String::new(),
                ingredients: vec!["salt to taste".into()],
            },
        ];
        let (kept, log) = parse_recipes(&recipes, &UnitVocabulary::bundled());
        assert_eq!(kept.len(), 1);
        let reasons: Vec<&str> = log.entries.iter().map(|e| e.reason.as_str()).collect();
        assert_eq!(reasons, ["unknown_unit_words", "empty_recipe"]);
    }
}
