//! Basic unit vocabulary: volume, weight and counting units, plus spelling aliases.
//!
//! The bundled vocabulary holds the 52 basic units. Size words (`large`, `big`,
//! `medium`, `small`) and `of` are counting-unit members but the line grammar
//! consumes them as modifiers rather than as the unit of a line.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Assigned when the ingredient name directly follows the quantity.
pub const NO_UNIT: &str = "no_unit";

const BUNDLED: &str = include_str!("../data/units.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitClass {
    Volume,
    Weight,
    Count,
}

impl fmt::Display for UnitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitClass::Volume => "volume",
            UnitClass::Weight => "weight",
            UnitClass::Count => "count",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum VocabularyError {
    #[error("line {line}: unknown section `{name}`")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unit `{unit}` appears before any section header")]
    NoSection { line: usize, unit: String },
    #[error("line {line}: unit `{unit}` is listed more than once")]
    Duplicate { line: usize, unit: String },
    #[error("line {line}: malformed alias `{text}`")]
    BadAlias { line: usize, text: String },
    #[error("alias `{alias}` points at unknown unit `{target}`")]
    DanglingAlias { alias: String, target: String },
    #[error("vocabulary has no `{NO_UNIT}` counting unit")]
    MissingNoUnit,
}

/// Multiplier attached to a size word, or `None` for any other token.
pub fn size_multiplier(word: &str) -> Option<(i64, i64)> {
    match word {
        "large" | "big" => Some((6, 5)),
        "medium" => Some((1, 1)),
        "small" => Some((4, 5)),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitVocabulary {
    classes: BTreeMap<String, UnitClass>,
    aliases: BTreeMap<String, String>,
}

impl UnitVocabulary {
    /// The bundled 52-unit vocabulary.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled unit vocabulary is well formed")
    }

    /// Parses the sectioned text format (`[volume]`, `[weight]`, `[count]`, optional `[alias]`).
    pub fn parse(text: &str) -> Result<Self, VocabularyError> {
        enum Section {
            Class(UnitClass),
            Alias,
        }
        let mut section = None;
        let mut classes = BTreeMap::new();
        let mut aliases = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "volume" => Section::Class(UnitClass::Volume),
                    "weight" => Section::Class(UnitClass::Weight),
                    "count" | "counting" => Section::Class(UnitClass::Count),
                    "alias" => Section::Alias,
                    other => {
                        return Err(VocabularyError::UnknownSection {
                            line: line_no,
                            name: other.to_string(),
                        })
                    }
                });
                continue;
            }
            match section {
                None => {
                    return Err(VocabularyError::NoSection {
                        line: line_no,
                        unit: line.to_string(),
                    })
                }
                Some(Section::Class(class)) => {
                    let unit = line.to_lowercase();
                    if classes.insert(unit.clone(), class).is_some() {
                        return Err(VocabularyError::Duplicate { line: line_no, unit });
                    }
                }
                Some(Section::Alias) => {
                    let (alias, target) = line.split_once('=').ok_or_else(|| VocabularyError::BadAlias {
                        line: line_no,
                        text: line.to_string(),
                    })?;
                    let (alias, target) = (alias.trim().to_lowercase(), target.trim().to_lowercase());
                    if alias.is_empty() || target.is_empty() {
                        return Err(VocabularyError::BadAlias {
                            line: line_no,
                            text: line.to_string(),
                        });
                    }
                    aliases.insert(alias, target);
                }
            }
        }
        for (alias, target) in &aliases {
            if !classes.contains_key(target) {
                return Err(VocabularyError::DanglingAlias {
                    alias: alias.clone(),
                    target: target.clone(),
                });
            }
        }
        if classes.get(NO_UNIT) != Some(&UnitClass::Count) {
            return Err(VocabularyError::MissingNoUnit);
        }
        // An alias never shadows a real unit.
        aliases.retain(|alias, _| !classes.contains_key(alias));
        Ok(Self { classes, aliases })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, unit: &str) -> Option<UnitClass> {
        self.classes.get(unit).copied()
    }

    pub fn contains(&self, unit: &str) -> bool {
        self.classes.contains_key(unit)
    }

    pub fn units(&self, class: UnitClass) -> impl Iterator<Item = &str> {
        self.classes
            .iter()
            .filter(move |(_, c)| **c == class)
            .map(|(u, _)| u.as_str())
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.aliases.iter().map(|(a, t)| (a.as_str(), t.as_str()))
    }

    /// Resolves a lowercase token to a vocabulary entry: exact match, alias, then
    /// plural forms (`cups`, `boxes`, `leaves`) whose singular is in the vocabulary.
    pub fn resolve(&self, token: &str) -> Option<&str> {
        if let Some((unit, _)) = self.classes.get_key_value(token) {
            return Some(unit);
        }
        if let Some(target) = self.aliases.get(token) {
            return Some(target);
        }
        let singulars = [
            token.strip_suffix('s').map(str::to_string),
            token.strip_suffix("es").map(str::to_string),
            token.strip_suffix("ves").map(|s| format!("{s}f")),
        ];
        for singular in singulars.into_iter().flatten() {
            if singular.is_empty() {
                continue;
            }
            if let Some((unit, _)) = self.classes.get_key_value(singular.as_str()) {
                return Some(unit);
            }
            if let Some(target) = self.aliases.get(&singular) {
                return Some(target);
            }
        }
        None
    }

    /// A unit that can stand as the unit of a line: everything except size words,
    /// `of`, and the `no_unit` marker.
    pub fn is_basic_unit(&self, unit: &str) -> bool {
        self.contains(unit) && unit != NO_UNIT && unit != "of" && size_multiplier(unit).is_none()
    }
}

impl Default for UnitVocabulary {
    fn default() -> Self {
        Self::bundled()
    }
}
