//! Canonical ingredient vocabulary construction.
//!
//! Raw names are grouped by stemmed form, then pairs are proposed for merging
//! when they sit close in an embedding space, share at least two words, or map
//! to the same external database item. A plain-text decision ledger records which
//! proposals a person accepted; accepted merges are unioned and each group is
//! represented by its most frequent member.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantity_parser::ParsedRecipe;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("threshold {0} is outside the allowed interval")]
    BadThreshold(f64),
    #[error("ledger line {line} references unknown proposal `{source_name} -> {target}`")]
    UnknownProposal {
        line: usize,
        source_name: String,
        target: String,
    },
    #[error("ledger line {line}: {message}")]
    MalformedLedger { line: usize, message: String },
    #[error("embedding line {line}: {message}")]
    MalformedEmbedding { line: usize, message: String },
    #[error("frequency line {line}: {message}")]
    MalformedFrequency { line: usize, message: String },
    #[error("no recipes to compute coverage over")]
    EmptyRecipeSet,
    #[error("recipe #{0} has no ingredients")]
    EmptyRecipe(usize),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

/// Deterministic suffix stripping for one lowercase word.
///
/// Handles plural `-s`, `-es`, `-ies` and verb forms `-ing`, `-ed`, `-ied`.
/// A stem is never shorter than three characters.
pub fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    let keep = |s: &str| s.chars().count() >= 3;
    if let Some(base) = w.strip_suffix("ies").or_else(|| w.strip_suffix("ied")) {
        if base.chars().count() >= 2 {
            return format!("{base}y");
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes", "oes"] {
        if let Some(base) = w.strip_suffix(suffix) {
            let kept = &w[..base.len() + suffix.len() - 2];
            if keep(kept) {
                return kept.to_string();
            }
        }
    }
    if let Some(base) = w.strip_suffix("ing") {
        if keep(base) {
            return base.to_string();
        }
    }
    if let Some(base) = w.strip_suffix("ed") {
        if keep(base) {
            return base.to_string();
        }
    }
    if let Some(base) = w.strip_suffix('s') {
        if !(base.ends_with('s') || base.ends_with('u') || base.ends_with('i')) && keep(base) {
            return base.to_string();
        }
    }
    w
}

/// Per-token stemmed form of a name.
pub fn stem_name(name: &str) -> String {
    name.split_whitespace().map(stem).collect::<Vec<_>>().join(" ")
}

/// Partitions names into groups with equal per-token stems. Groups appear in
/// order of first occurrence; members keep input order.
pub fn stem_merge<S: AsRef<str>>(names: &[S]) -> Vec<Vec<String>> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<String>> = Vec::new();
    for name in names {
        let name = name.as_ref();
        let key = stem_name(name);
        match index.get(&key) {
            Some(&g) => {
                if !groups[g].iter().any(|n| n == name) {
                    groups[g].push(name.to_string());
                }
            }
            None => {
                index.insert(key, groups.len());
                groups.push(vec![name.to_string()]);
            }
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    Stem,
    Embedding,
    SharedWords,
    SameMapping,
}

impl fmt::Display for MergeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeRule::Stem => "stem",
            MergeRule::Embedding => "embedding",
            MergeRule::SharedWords => "shared_words",
            MergeRule::SameMapping => "same_mapping",
        })
    }
}

impl FromStr for MergeRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stem" => Ok(MergeRule::Stem),
            "embedding" => Ok(MergeRule::Embedding),
            "shared_words" => Ok(MergeRule::SharedWords),
            "same_mapping" => Ok(MergeRule::SameMapping),
            other => Err(format!("unknown merge rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeProposal {
    pub source: String,
    pub target: String,
    pub rule: MergeRule,
    /// Cosine similarity for the embedding rule, 1.0 otherwise.
    pub score: f64,
}

impl MergeProposal {
    fn for_pair(a: &str, b: &str, rule: MergeRule, score: f64) -> Self {
        let (target, source) = if a <= b { (a, b) } else { (b, a) };
        Self {
            source: source.to_string(),
            target: target.to_string(),
            rule,
            score: score.clamp(0.0, 1.0),
        }
    }

    /// One line of the proposals TSV: `rule<TAB>score<TAB>source<TAB>target`.
    pub fn to_tsv(&self) -> String {
        format!("{}\t{:.6}\t{}\t{}", self.rule, self.score, self.source, self.target)
    }

    pub fn from_tsv(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [rule, score, source, target] = fields[..] else {
            return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
        };
        Ok(Self {
            source: source.to_string(),
            target: target.to_string(),
            rule: rule.parse()?,
            score: score.parse().map_err(|e| format!("bad score `{score}`: {e}"))?,
        })
    }
}

fn sort_proposals(proposals: &mut [MergeProposal]) {
    proposals.sort_by(|a, b| {
        a.rule
            .cmp(&b.rule)
            .then(b.score.total_cmp(&a.score))
            .then_with(|| a.source.cmp(&b.source))
            .then_with(|| a.target.cmp(&b.target))
    });
}

/// Proposals for every stem group with more than one member; each member
/// points at the group's lexicographically smallest name.
pub fn stem_proposals<S: AsRef<str>>(names: &[S]) -> Vec<MergeProposal> {
    let mut out = Vec::new();
    for group in stem_merge(names) {
        let Some(target) = group.iter().min() else { continue };
        for member in group.iter().filter(|m| *m != target) {
            out.push(MergeProposal {
                source: member.clone(),
                target: target.clone(),
                rule: MergeRule::Stem,
                score: 1.0,
            });
        }
    }
    sort_proposals(&mut out);
    out
}

/// Word vectors keyed by word; every vector has the same dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<(), CanonError> {
        if vector.len() != self.dim || self.dim == 0 {
            return Err(CanonError::MalformedEmbedding {
                line: 0,
                message: format!("`{word}` has dimension {}, expected {}", vector.len(), self.dim),
            });
        }
        self.vectors.insert(word.to_lowercase(), vector);
        Ok(())
    }

    /// Parses `word v1 v2 ... vd` lines.
    pub fn parse(text: &str) -> Result<Self, CanonError> {
        let mut table: Option<EmbeddingTable> = None;
        for (n, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let vector = fields
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CanonError::MalformedEmbedding {
                    line: n + 1,
                    message: e.to_string(),
                })?;
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(CanonError::MalformedEmbedding {
                    line: n + 1,
                    message: "non-finite component".into(),
                });
            }
            let t = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            t.insert(word, vector).map_err(|e| match e {
                CanonError::MalformedEmbedding { message, .. } => {
                    CanonError::MalformedEmbedding { line: n + 1, message }
                }
                other => other,
            })?;
        }
        Ok(table.unwrap_or_default())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Mean of the name's token vectors. Tokens without a vector are skipped;
    /// `None` when no token has one.
    pub fn name_embedding(&self, name: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0usize;
        for token in name.split_whitespace() {
            if let Some(v) = self.get(token) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                count += 1;
            }
        }
        (count > 0).then(|| sum.into_iter().map(|s| s / count as f64).collect())
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// One proposal per unordered pair of distinct names for which a rule fires.
/// When several rules fire the earliest of embedding, shared words, same
/// mapping is reported. Output order is independent of input order.
pub fn propose_merges<S: AsRef<str>>(
    names: &[S],
    embeddings: &EmbeddingTable,
    mapping: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<Vec<MergeProposal>, CanonError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CanonError::BadThreshold(threshold));
    }
    let unique: BTreeSet<&str> = names.iter().map(AsRef::as_ref).collect();
    let names: Vec<&str> = unique.into_iter().collect();
    let vectors: Vec<Option<Vec<f64>>> = names.iter().map(|n| embeddings.name_embedding(n)).collect();
    let tokens: Vec<BTreeSet<&str>> = names.iter().map(|n| n.split_whitespace().collect()).collect();

    let mut out = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            let similarity = match (&vectors[i], &vectors[j]) {
                (Some(a), Some(b)) => Some(cosine(a, b)),
                _ => None,
            };
            let proposal = if let Some(s) = similarity.filter(|s| *s >= threshold) {
                Some(MergeProposal::for_pair(names[i], names[j], MergeRule::Embedding, s))
            } else if tokens[i].intersection(&tokens[j]).count() >= 2 {
                Some(MergeProposal::for_pair(names[i], names[j], MergeRule::SharedWords, 1.0))
            } else {
                match (mapping.get(names[i]), mapping.get(names[j])) {
                    (Some(a), Some(b)) if a == b => {
                        Some(MergeProposal::for_pair(names[i], names[j], MergeRule::SameMapping, 1.0))
                    }
                    _ => None,
                }
            };
            out.extend(proposal);
        }
    }
    sort_proposals(&mut out);
    Ok(out)
}

/// Stem proposals plus rule proposals, one per pair, in canonical order.
pub fn propose_all<S: AsRef<str>>(
    names: &[S],
    embeddings: &EmbeddingTable,
    mapping: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<Vec<MergeProposal>, CanonError> {
    let mut all = stem_proposals(names);
    let seen: BTreeSet<(String, String)> = all.iter().map(|p| (p.source.clone(), p.target.clone())).collect();
    for p in propose_merges(names, embeddings, mapping, threshold)? {
        if !seen.contains(&(p.source.clone(), p.target.clone())) {
            all.push(p);
        }
    }
    sort_proposals(&mut all);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub accept: bool,
    pub source: String,
    pub target: String,
    pub rule: Option<MergeRule>,
    pub line: usize,
}

/// Human accept/reject decisions, one per line:
/// `accept|reject <source> -> <target> [rule]`. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionLedger {
    pub decisions: Vec<Decision>,
}

impl DecisionLedger {
    pub fn parse(text: &str) -> Result<Self, CanonError> {
        let mut decisions = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| CanonError::MalformedLedger {
                line: n + 1,
                message: message.to_string(),
            };
            let (verb, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| bad("missing names"))?;
            let accept = match verb {
                "accept" => true,
                "reject" => false,
                _ => return Err(bad("expected `accept` or `reject`")),
            };
            let (source, rest) = rest.split_once("->").ok_or_else(|| bad("missing `->`"))?;
            let mut target = rest.trim();
            let mut rule = None;
            if let Some(open) = target.rfind('[') {
                if target.ends_with(']') {
                    let tag = &target[open + 1..target.len() - 1];
                    rule = Some(tag.trim().parse().map_err(|e: String| bad(&e))?);
                    target = target[..open].trim();
                }
            }
            let source = source.trim();
            if source.is_empty() || target.is_empty() {
                return Err(bad("empty ingredient name"));
            }
            decisions.push(Decision {
                accept,
                source: source.to_string(),
                target: target.to_string(),
                rule,
                line: n + 1,
            });
        }
        Ok(Self { decisions })
    }

    /// A draft ledger: stem merges pre-accepted, everything else pre-rejected.
    pub fn draft(proposals: &[MergeProposal]) -> String {
        let mut out = String::from("# accept|reject <source> -> <target> [rule]\n");
        for p in proposals {
            let verb = if p.rule == MergeRule::Stem { "accept" } else { "reject" };
            out.push_str(&format!("{verb} {} -> {} [{}]\n", p.source, p.target, p.rule));
        }
        out
    }
}

/// Ordered canonical names plus a raw name to canonical index map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRecord", into = "VocabularyRecord")]
pub struct CanonicalVocabulary {
    names: Vec<String>,
    aliases: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRecord {
    names: Vec<String>,
    aliases: BTreeMap<String, usize>,
}

impl TryFrom<VocabularyRecord> for CanonicalVocabulary {
    type Error = CanonError;

    fn try_from(r: VocabularyRecord) -> Result<Self, Self::Error> {
        CanonicalVocabulary::new(r.names, r.aliases)
    }
}

impl From<CanonicalVocabulary> for VocabularyRecord {
    fn from(v: CanonicalVocabulary) -> Self {
        VocabularyRecord {
            names: v.names,
            aliases: v.aliases,
        }
    }
}

impl CanonicalVocabulary {
    /// Canonical names map to themselves; missing self-aliases are added.
    pub fn new(names: Vec<String>, mut aliases: BTreeMap<String, usize>) -> Result<Self, CanonError> {
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(CanonError::InvalidVocabulary("duplicate canonical name".into()));
        }
        if let Some((alias, idx)) = aliases.iter().find(|(_, i)| **i >= names.len()) {
            return Err(CanonError::InvalidVocabulary(format!(
                "alias `{alias}` points at index {idx} of {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            match aliases.get(name) {
                Some(&j) if j != i => {
                    return Err(CanonError::InvalidVocabulary(format!(
                        "canonical `{name}` aliases another entry"
                    )))
                }
                _ => {
                    aliases.insert(name.clone(), i);
                }
            }
        }
        Ok(Self { names, aliases })
    }

    /// Each name is its own canonical entry.
    pub fn identity<S: AsRef<str>>(names: &[S]) -> Self {
        let unique: BTreeSet<String> = names.iter().map(|n| n.as_ref().to_string()).collect();
        Self::new(unique.into_iter().collect(), BTreeMap::new()).expect("unique names form a vocabulary")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn aliases(&self) -> &BTreeMap<String, usize> {
        &self.aliases
    }

    pub fn resolve(&self, raw: &str) -> Option<usize> {
        self.aliases.get(raw).copied()
    }

    pub fn canonical(&self, raw: &str) -> Option<&str> {
        self.resolve(raw).map(|i| self.names[i].as_str())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Unions every accepted proposal. Each group's canonical name is its most
/// frequent member, ties going to the lexicographically smallest name.
/// Unlisted proposals count as rejected.
pub fn apply_decisions(
    names: &[(String, u64)],
    proposals: &[MergeProposal],
    ledger: &DecisionLedger,
) -> Result<CanonicalVocabulary, CanonError> {
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for (name, count) in names {
        *freq.entry(name.clone()).or_default() += count;
    }
    for p in proposals {
        freq.entry(p.source.clone()).or_default();
        freq.entry(p.target.clone()).or_default();
    }
    let all: Vec<String> = freq.keys().cloned().collect();
    let position: HashMap<&str, usize> = all.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    let mut uf = UnionFind::new(all.len());
    for d in &ledger.decisions {
        let known = proposals
            .iter()
            .any(|p| p.source == d.source && p.target == d.target && d.rule.is_none_or(|r| r == p.rule));
        if !known {
            return Err(CanonError::UnknownProposal {
                line: d.line,
                source_name: d.source.clone(),
                target: d.target.clone(),
            });
        }
        if d.accept {
            uf.union(position[d.source.as_str()], position[d.target.as_str()]);
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..all.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut canonical_of_group: Vec<(String, Vec<usize>)> = groups
        .into_values()
        .map(|members| {
            let best = members
                .iter()
                .copied()
                .max_by(|&a, &b| freq[&all[a]].cmp(&freq[&all[b]]).then_with(|| all[b].cmp(&all[a])))
                .expect("groups are nonempty");
            (all[best].clone(), members)
        })
        .collect();
    canonical_of_group.sort_by(|a, b| a.0.cmp(&b.0));

    let mut aliases = BTreeMap::new();
    let mut canon_names = Vec::with_capacity(canonical_of_group.len());
    for (idx, (name, members)) in canonical_of_group.into_iter().enumerate() {
        for m in members {
            aliases.insert(all[m].clone(), idx);
        }
        canon_names.push(name);
    }
    CanonicalVocabulary::new(canon_names, aliases)
}

/// Occurrence counts of ingredient names across recipes.
pub fn name_frequencies(recipes: &[ParsedRecipe]) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for recipe in recipes {
        for line in &recipe.lines {
            *freq.entry(line.ingredient_name.clone()).or_insert(0) += 1;
        }
    }
    freq
}

/// The `n` most frequent names, by descending count then name.
pub fn top_n(freq: &BTreeMap<String, u64>, n: usize) -> Vec<(String, u64)> {
    let mut ranked: Vec<(String, u64)> = freq.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

pub fn parse_frequencies(text: &str) -> Result<Vec<(String, u64)>, CanonError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (name, count) = line.rsplit_once('\t').ok_or(CanonError::MalformedFrequency {
            line: n + 1,
            message: "expected `name<TAB>count`".into(),
        })?;
        let count = count.trim().parse().map_err(|e| CanonError::MalformedFrequency {
            line: n + 1,
            message: format!("{e}"),
        })?;
        out.push((name.to_string(), count));
    }
    Ok(out)
}

pub fn render_frequencies(freq: &[(String, u64)]) -> String {
    freq.iter().map(|(name, count)| format!("{name}\t{count}\n")).collect()
}

/// Per-recipe `(covered, total)` counts and the mean coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage {
    pub per_recipe: Vec<(usize, usize)>,
    pub mean: f64,
}

impl Coverage {
    pub fn fraction(&self, k: usize) -> f64 {
        let (c, t) = self.per_recipe[k];
        c as f64 / t as f64
    }

    /// The mean as an exact rational, (1/R) Σ covered/total.
    pub fn mean_exact(&self) -> BigRational {
        let sum = self.per_recipe.iter().fold(BigRational::zero(), |acc, &(c, t)| {
            acc + BigRational::new(BigInt::from(c), BigInt::from(t))
        });
        sum / BigRational::from_integer(BigInt::from(self.per_recipe.len()))
    }
}

/// Coverage of each recipe's ingredient names by the vocabulary's alias map.
pub fn compute_coverage<S: AsRef<str>>(
    recipes: &[Vec<S>],
    vocab: &CanonicalVocabulary,
) -> Result<Coverage, CanonError> {
    if recipes.is_empty() {
        return Err(CanonError::EmptyRecipeSet);
    }
    let mut per_recipe = Vec::with_capacity(recipes.len());
    for (k, recipe) in recipes.iter().enumerate() {
        if recipe.is_empty() {
            return Err(CanonError::EmptyRecipe(k));
        }
        let covered = recipe.iter().filter(|n| vocab.resolve(n.as_ref()).is_some()).count();
        per_recipe.push((covered, recipe.len()));
    }
    let mut coverage = Coverage { per_recipe, mean: 0.0 };
    coverage.mean = coverage.mean_exact().to_f64().unwrap_or(f64::NAN);
    Ok(coverage)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageFilter {
    pub kept: Vec<ParsedRecipe>,
    /// Recipe id and its coverage.
    pub dropped: Vec<(String, f64)>,
}

/// Keeps recipes whose coverage is at least `min_coverage` and removes their
/// uncovered ingredient lines.
pub fn filter_by_coverage(
    recipes: &[ParsedRecipe],
    vocab: &CanonicalVocabulary,
    min_coverage: f64,
) -> Result<CoverageFilter, CanonError> {
    if !(0.0..=1.0).contains(&min_coverage) {
        return Err(CanonError::BadThreshold(min_coverage));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for recipe in recipes {
        let total = recipe.lines.len();
        let covered: Vec<_> = recipe
            .lines
            .iter()
            .filter(|l| vocab.resolve(&l.ingredient_name).is_some())
            .cloned()
            .collect();
        let coverage = if total == 0 {
            0.0
        } else {
            covered.len() as f64 / total as f64
        };
        if total > 0 && coverage >= min_coverage {
            kept.push(ParsedRecipe {
                lines: covered,
                ..recipe.clone()
            });
        } else {
            dropped.push((recipe.id.clone(), coverage));
        }
    }
    Ok(CoverageFilter { kept, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantity_parser::{parse_ingredient_line, LineParse};
    use crate::units::UnitVocabulary;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn stemmer_forms() {
        assert_eq!(stem("tomatoes"), "tomato");
        assert_eq!(stem("tomato"), "tomato");
        assert_eq!(stem("berries"), "berry");
        assert_eq!(stem("dried"), "dry");
        assert_eq!(stem("peaches"), "peach");
        assert_eq!(stem("eggs"), "egg");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("couscous"), "couscous");
        assert_eq!(stem("red"), "red");
        assert_eq!(stem("icing"), "icing");
        assert_eq!(stem("chopped"), "chopp");
        assert_eq!(stem("chopping"), "chopp");
    }

    #[test]
    fn stem_groups() {
        assert_eq!(
            stem_merge(&["tomato", "tomatoes"]),
            vec![names(&["tomato", "tomatoes"])]
        );
        assert_eq!(
            stem_merge(&["olive oil", "olive oils"]),
            vec![names(&["olive oil", "olive oils"])]
        );
        assert_eq!(
            stem_merge(&["salt", "pepper"]),
            vec![names(&["salt"]), names(&["pepper"])]
        );
    }

    fn embeddings() -> EmbeddingTable {
        EmbeddingTable::parse(
            "butter 1 0 0\nmargarine 0.9 0.1 0\nsalt 0 1 0\nsugar 0 0 1\nred 0.2 0.2 0.9\ngreen 0.1 0.3 0.8\n",
        )
        .unwrap()
    }

    #[test]
    fn shared_words_rule() {
        let p = propose_merges(
            &["red bell pepper", "green bell pepper"],
            &EmbeddingTable::default(),
            &BTreeMap::new(),
            0.85,
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].rule, MergeRule::SharedWords);
        assert_eq!(
            (p[0].source.as_str(), p[0].target.as_str()),
            ("red bell pepper", "green bell pepper")
        );
    }

    #[test]
    fn same_mapping_rule() {
        let mapping = BTreeMap::from([
            ("butter".to_string(), "item-1".to_string()),
            ("margarine".to_string(), "item-1".to_string()),
        ]);
        let p = propose_merges(&["butter", "margarine"], &EmbeddingTable::default(), &mapping, 0.85).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].rule, MergeRule::SameMapping);
    }

    #[test]
    fn embedding_rule_and_no_rule() {
        let emb = embeddings();
        let p = propose_merges(&["butter", "margarine", "salt", "sugar"], &emb, &BTreeMap::new(), 0.85).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].rule, MergeRule::Embedding);
        assert!((p[0].score - 0.9 / (0.82f64).sqrt()).abs() < 1e-12);
        let none = propose_merges(&["salt", "sugar"], &emb, &BTreeMap::new(), 0.85).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn names_without_vectors_skip_embedding_rule() {
        let emb = embeddings();
        let p = propose_merges(&["butter", "ghee"], &emb, &BTreeMap::new(), 0.1).unwrap();
        assert!(p.is_empty());
        // partially embeddable names use the tokens that have vectors
        assert!(emb.name_embedding("unsalted butter").is_some());
    }

    #[test]
    fn bad_threshold() {
        for t in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(propose_merges(&["a"], &EmbeddingTable::default(), &BTreeMap::new(), t).is_err());
        }
    }

    #[test]
    fn ledger_parsing() {
        let ledger = DecisionLedger::parse(
            "# comment\naccept tomatoes -> tomato [stem]\n\nreject red bell pepper -> green bell pepper\n",
        )
        .unwrap();
        assert_eq!(ledger.decisions.len(), 2);
        assert_eq!(ledger.decisions[0].rule, Some(MergeRule::Stem));
        assert_eq!(ledger.decisions[1].source, "red bell pepper");
        assert!(!ledger.decisions[1].accept);
        assert!(DecisionLedger::parse("maybe a -> b").is_err());
        assert!(DecisionLedger::parse("accept a b").is_err());
        assert!(DecisionLedger::parse("accept a -> b [fuzzy]").is_err());
    }

    fn freq(pairs: &[(&str, u64)]) -> Vec<(String, u64)> {
        pairs.iter().map(|(n, c)| (n.to_string(), *c)).collect()
    }

    #[test]
    fn accepted_merge_keeps_most_frequent() {
        let proposals = stem_proposals(&["tomato", "tomatoes"]);
        let ledger = DecisionLedger::parse("accept tomatoes -> tomato").unwrap();
        let vocab = apply_decisions(&freq(&[("tomato", 10), ("tomatoes", 3)]), &proposals, &ledger).unwrap();
        assert_eq!(vocab.names(), &["tomato".to_string()]);
        assert_eq!(vocab.canonical("tomatoes"), Some("tomato"));

        let vocab = apply_decisions(&freq(&[("tomato", 1), ("tomatoes", 3)]), &proposals, &ledger).unwrap();
        assert_eq!(vocab.names(), &["tomatoes".to_string()]);
        assert_eq!(vocab.canonical("tomato"), Some("tomatoes"));
    }

    #[test]
    fn reject_all_is_identity() {
        let proposals = stem_proposals(&["tomato", "tomatoes", "salt"]);
        let ledger = DecisionLedger::parse("reject tomatoes -> tomato").unwrap();
        let f = freq(&[("tomato", 1), ("tomatoes", 1), ("salt", 4)]);
        let vocab = apply_decisions(&f, &proposals, &ledger).unwrap();
        assert_eq!(vocab, CanonicalVocabulary::identity(&["salt", "tomato", "tomatoes"]));
        let empty = apply_decisions(&f, &proposals, &DecisionLedger::default()).unwrap();
        assert_eq!(empty, vocab);
    }

    #[test]
    fn transitive_merges() {
        let proposals = vec![
            MergeProposal {
                source: "a".into(),
                target: "b".into(),
                rule: MergeRule::SharedWords,
                score: 1.0,
            },
            MergeProposal {
                source: "b".into(),
                target: "c".into(),
                rule: MergeRule::SharedWords,
                score: 1.0,
            },
        ];
        let ledger = DecisionLedger::parse("accept a -> b\naccept b -> c\n").unwrap();
        let vocab = apply_decisions(&freq(&[("a", 1), ("b", 1), ("c", 5)]), &proposals, &ledger).unwrap();
        assert_eq!(vocab.len(), 1);
        assert_eq!(vocab.canonical("a"), Some("c"));
        assert_eq!(vocab.canonical("b"), Some("c"));
    }

    #[test]
    fn unknown_proposal() {
        let ledger = DecisionLedger::parse("accept x -> y").unwrap();
        assert!(matches!(
            apply_decisions(&freq(&[("x", 1)]), &[], &ledger),
            Err(CanonError::UnknownProposal { line: 1, .. })
        ));
        let proposals = stem_proposals(&["tomato", "tomatoes"]);
        let wrong_rule = DecisionLedger::parse("accept tomatoes -> tomato [embedding]").unwrap();
        assert!(apply_decisions(&[], &proposals, &wrong_rule).is_err());
    }

    #[test]
    fn aliases_resolve_in_one_hop() {
        let proposals = stem_proposals(&["egg", "eggs"]);
        let vocab = apply_decisions(
            &freq(&[("egg", 2), ("eggs", 9)]),
            &proposals,
            &DecisionLedger::parse("accept eggs -> egg").unwrap(),
        )
        .unwrap();
        for (alias, &idx) in vocab.aliases() {
            let canonical = &vocab.names()[idx];
            assert_eq!(vocab.resolve(canonical), Some(idx), "{alias}");
        }
    }

    #[test]
    fn coverage_examples() {
        let vocab = CanonicalVocabulary::identity(&["a", "b", "c"]);
        let one = compute_coverage(&[vec!["a", "b", "c", "z"]], &vocab).unwrap();
        assert_eq!(one.mean, 0.75);
        let full = compute_coverage(&[vec!["a"], vec!["b", "c"]], &vocab).unwrap();
        assert_eq!(full.mean, 1.0);
        let two = compute_coverage(&[vec!["a", "b"], vec!["a", "z"]], &vocab).unwrap();
        assert_eq!((two.fraction(0), two.fraction(1), two.mean), (1.0, 0.5, 0.75));
        assert_eq!(compute_coverage::<&str>(&[], &vocab), Err(CanonError::EmptyRecipeSet));
        assert_eq!(
            compute_coverage(&[vec!["a"], vec![]], &vocab),
            Err(CanonError::EmptyRecipe(1))
        );
    }

    fn recipe(id: &str, lines: &[&str]) -> ParsedRecipe {
        let vocab = UnitVocabulary::bundled();
        ParsedRecipe {
            id: id.into(),
            title: String::new(),
            lines: lines
                .iter()
                .map(|l| match parse_ingredient_line(l, &vocab) {
                    LineParse::Parsed(p) => p,
                    other => panic!("{other:?}"),
                })
                .collect(),
        }
    }

    #[test]
    fn coverage_filter_boundary() {
        let vocab = CanonicalVocabulary::identity(&["a", "b", "c", "d"]);
        let at_80 = recipe("r1", &["1 a", "1 b", "1 c", "1 d", "1 z"]);
        let below = recipe("r2", &["1 a", "1 z", "1 y"]);
        let out = filter_by_coverage(&[at_80.clone(), below.clone()], &vocab, 0.8).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "r1");
        assert_eq!(out.kept[0].lines.len(), 4);
        assert_eq!(out.dropped, vec![("r2".to_string(), 1.0 / 3.0)]);

        let all = filter_by_coverage(&[at_80, below], &vocab, 0.0).unwrap();
        assert_eq!(all.kept.len(), 2);
        assert!(filter_by_coverage(&[], &vocab, 1.5).is_err());
    }

    #[test]
    fn coverage_079_is_dropped() {
        // 79 of 100 lines covered
        let vocab = CanonicalVocabulary::identity(&["a"]);
        let mut lines: Vec<&str> = vec!["1 a"; 79];
        lines.extend(vec!["1 z"; 21]);
        let out = filter_by_coverage(&[recipe("r", &lines)], &vocab, 0.8).unwrap();
        assert!(out.kept.is_empty());
    }

    #[test]
    fn proposal_tsv_round_trip() {
        let p = MergeProposal {
            source: "b c".into(),
            target: "a c".into(),
            rule: MergeRule::Embedding,
            score: 0.875,
        };
        assert_eq!(MergeProposal::from_tsv(&p.to_tsv()).unwrap(), p);
    }
}
