//! Ingredient line parsing.
//!
//! A line is read left to right as
//!
//! ```text
//! quantity [ "(" quantity unit ")" ] [ size-word ] [ unit ] [ "of" ] name
//! ```
//!
//! Quantities are exact rationals. Ranges (`24-25`, `24 to 25`) become a
//! midpoint value plus a width. Unicode fraction glyphs are rewritten to ASCII
//! fractions before tokenizing, so `1½` reads as `1 1/2`.

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{size_multiplier, UnitVocabulary, NO_UNIT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuantityError {
    #[error("`{0}` does not start with a number")]
    NotAQuantity(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("range `{0}` runs from a larger to a smaller value")]
    InvertedRange(String),
}

/// An amount in unit counts: a midpoint value and the width of the stated range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantity {
    #[serde(with = "crate::ratio_serde")]
    pub value: Rational64,
    #[serde(with = "crate::ratio_serde")]
    pub range_width: Rational64,
}

impl Quantity {
    pub fn exact(value: Rational64) -> Self {
        Self {
            value,
            range_width: Rational64::zero(),
        }
    }

    /// The range `[low, high]`, stored as midpoint and width.
    pub fn range(low: Rational64, high: Rational64) -> Self {
        Self {
            value: (low + high) / 2,
            range_width: high - low,
        }
    }

    pub fn low(&self) -> Rational64 {
        self.value - self.range_width / 2
    }

    pub fn high(&self) -> Rational64 {
        self.value + self.range_width / 2
    }

    pub fn value_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    /// Text form that [`parse_quantity`] reads back to the same value.
    pub fn render(&self) -> String {
        if self.range_width.is_zero() {
            render_rational(self.value)
        } else {
            format!("{}-{}", render_rational(self.low()), render_rational(self.high()))
        }
    }
}

fn render_rational(r: Rational64) -> String {
    let (n, d) = (*r.numer(), *r.denom());
    if d == 1 {
        n.to_string()
    } else if n < d {
        format!("{n}/{d}")
    } else {
        format!("{} {}/{}", n / d, n % d, d)
    }
}

/// Sub-quantity written in parentheses, e.g. the `(15 1/4 ounce)` of a box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parenthetical {
    pub quantity: Quantity,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedIngredientLine {
    pub quantity: Quantity,
    pub unit: String,
    #[serde(with = "crate::ratio_serde")]
    pub size_multiplier: Rational64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parenthetical: Option<Parenthetical>,
    pub ingredient_name: String,
    pub raw: String,
}

impl ParsedIngredientLine {
    /// Canonical text form; parsing it yields the same quantity, unit, size and name.
    pub fn render(&self) -> String {
        let mut parts = vec![self.quantity.render()];
        if let Some(p) = &self.parenthetical {
            parts.push(format!("({} {})", p.quantity.render(), p.unit));
        }
        let size = self.size_multiplier;
        if size == Rational64::new(6, 5) {
            parts.push("large".into());
        } else if size == Rational64::new(4, 5) {
            parts.push("small".into());
        }
        if self.unit != NO_UNIT {
            parts.push(self.unit.clone());
        }
        parts.push(self.ingredient_name.clone());
        parts.join(" ")
    }
}

/// Lowercases, rewrites fraction glyphs and dashes, and splits into tokens.
///
/// Parentheses are tokens of their own. Trailing punctuation is stripped; a
/// stripped comma is kept as a `,` token since it ends the ingredient name.
/// Numeric ranges written without spaces (`24-25`) are split around the dash.
pub fn tokenize(raw: &str) -> Vec<String> {
    let mut text = String::with_capacity(raw.len() + 8);
    let mut prev: Option<char> = None;
    for c in raw.chars() {
        if let Some(frac) = glyph_fraction(c) {
            if prev.is_some_and(|p| p.is_ascii_digit()) {
                text.push(' ');
            }
            text.push_str(frac);
            text.push(' ');
        } else {
            match c {
                '\u{2044}' | '\u{2215}' => text.push('/'),
                '\u{2013}' | '\u{2014}' | '\u{2012}' | '\u{2212}' => text.push('-'),
                '(' | ')' => {
                    text.push(' ');
                    text.push(c);
                    text.push(' ');
                }
                _ => text.extend(c.to_lowercase()),
            }
        }
        prev = Some(c);
    }

    let mut tokens = Vec::new();
    for piece in text.split_whitespace() {
        let trimmed = piece.trim_end_matches([',', '.', ';', ':', '!', '?']);
        let had_comma = piece[trimmed.len()..].contains(',');
        if !trimmed.is_empty() {
            split_numeric_dash(trimmed, &mut tokens);
        }
        if had_comma {
            tokens.push(",".to_string());
        }
    }
    tokens
}

fn glyph_fraction(c: char) -> Option<&'static str> {
    Some(match c {
        '½' => "1/2",
        '¼' => "1/4",
        '¾' => "3/4",
        '⅓' => "1/3",
        '⅔' => "2/3",
        '⅛' => "1/8",
        '⅜' => "3/8",
        '⅝' => "5/8",
        '⅞' => "7/8",
        '⅕' => "1/5",
        '⅙' => "1/6",
        _ => return None,
    })
}

fn is_numeric_chunk(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '/')
        && s.chars().any(|c| c.is_ascii_digit())
}

fn split_numeric_dash(token: &str, out: &mut Vec<String>) {
    if token.contains('-') {
        let pieces: Vec<&str> = token.split('-').collect();
        let numeric = pieces.iter().all(|p| p.is_empty() || is_numeric_chunk(p));
        if numeric && pieces.iter().any(|p| !p.is_empty()) && token != "-" {
            for (i, p) in pieces.iter().enumerate() {
                if i > 0 {
                    out.push("-".to_string());
                }
                if !p.is_empty() {
                    out.push(p.to_string());
                }
            }
            return;
        }
    }
    out.push(token.to_string());
}

enum NumberToken {
    Integer(i64),
    Decimal(Rational64),
    Fraction(i64, i64),
}

fn parse_integer(s: &str) -> Option<i64> {
    if s.is_empty() || s.len() > 15 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

fn classify(token: &str) -> Result<Option<NumberToken>, QuantityError> {
    if let Some(i) = parse_integer(token) {
        return Ok(Some(NumberToken::Integer(i)));
    }
    if let Some((num, den)) = token.split_once('/') {
        return match (parse_integer(num), parse_integer(den)) {
            (Some(_), Some(0)) => Err(QuantityError::ZeroDenominator(token.to_string())),
            (Some(n), Some(d)) => Ok(Some(NumberToken::Fraction(n, d))),
            _ => Ok(None),
        };
    }
    if let Some((int, frac)) = token.split_once('.') {
        let int_part = if int.is_empty() { Some(0) } else { parse_integer(int) };
        if frac.len() > 9 || frac.is_empty() {
            return Ok(None);
        }
        if let (Some(i), Some(f)) = (int_part, parse_integer(frac)) {
            let scale = 10i64.pow(frac.len() as u32);
            return Ok(Some(NumberToken::Decimal(
                Rational64::from_integer(i) + Rational64::new(f, scale),
            )));
        }
    }
    Ok(None)
}

/// Reads one number (integer, decimal, fraction, or mixed number) at `tokens[at]`.
fn take_number(tokens: &[String], at: usize) -> Result<Option<(Rational64, usize)>, QuantityError> {
    let Some(first) = tokens.get(at) else {
        return Ok(None);
    };
    match classify(first)? {
        None => Ok(None),
        Some(NumberToken::Decimal(r)) => Ok(Some((r, at + 1))),
        Some(NumberToken::Fraction(n, d)) => Ok(Some((Rational64::new(n, d), at + 1))),
        Some(NumberToken::Integer(i)) => {
            // mixed number: an integer followed by a proper fraction
            if let Some(next) = tokens.get(at + 1) {
                if let Ok(Some(NumberToken::Fraction(n, d))) = classify(next) {
                    if n < d {
                        return Ok(Some((Rational64::from_integer(i) + Rational64::new(n, d), at + 2)));
                    }
                }
            }
            Ok(Some((Rational64::from_integer(i), at + 1)))
        }
    }
}

/// Parses the quantity at the start of `tokens`; returns it with the index of the
/// first unconsumed token.
pub fn parse_quantity_prefix(tokens: &[String]) -> Result<(Quantity, usize), QuantityError> {
    let head = tokens.first().cloned().unwrap_or_default();
    let (low, next) = take_number(tokens, 0)?.ok_or(QuantityError::NotAQuantity(head))?;
    if let Some(sep) = tokens.get(next) {
        if sep == "-" || sep == "to" {
            if let Some((high, end)) = take_number(tokens, next + 1)? {
                if high < low {
                    return Err(QuantityError::InvertedRange(tokens[..end].join(" ")));
                }
                return Ok((Quantity::range(low, high), end));
            }
        }
    }
    Ok((Quantity::exact(low), next))
}

/// Parses the quantity expression that begins `text`. Trailing text is ignored.
pub fn parse_quantity(text: &str) -> Result<Quantity, QuantityError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(QuantityError::NotAQuantity(text.to_string()));
    }
    parse_quantity_prefix(&tokens).map(|(q, _)| q)
}

/// Unit-position structure of the tokens following a quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitPhrase {
    pub unit: String,
    pub size_multiplier: Rational64,
    pub parenthetical: Option<Parenthetical>,
    /// Tokens after the unit phrase, the candidate ingredient name.
    pub remainder: Vec<String>,
}

fn match_unit(tokens: &[String], at: usize, vocab: &UnitVocabulary) -> Option<(String, usize)> {
    let token = tokens.get(at)?;
    if token == "fluid" || token == "fl" {
        let next = tokens.get(at + 1)?;
        if vocab.resolve(next) == Some("ounce") && vocab.is_basic_unit("fluid_ounce") {
            return Some(("fluid_ounce".to_string(), at + 2));
        }
        return None;
    }
    let unit = vocab.resolve(token)?;
    vocab.is_basic_unit(unit).then(|| (unit.to_string(), at + 1))
}

fn take_parenthetical(tokens: &[String], vocab: &UnitVocabulary) -> Option<(Parenthetical, usize)> {
    if tokens.first().map(String::as_str) != Some("(") {
        return None;
    }
    let close = tokens.iter().position(|t| t == ")")?;
    let inner = &tokens[1..close];
    let (quantity, next) = parse_quantity_prefix(inner).ok()?;
    let (unit, end) = match_unit(inner, next, vocab)?;
    (end == inner.len()).then(|| (Parenthetical { quantity, unit }, close + 1))
}

/// Splits the tokens after a quantity into parenthetical, size word, unit and
/// remainder. Nothing fails here: without a unit token the unit is `no_unit`.
pub fn parse_unit_phrase(tokens: &[String], vocab: &UnitVocabulary) -> UnitPhrase {
    let mut at = 0;
    let parenthetical = take_parenthetical(tokens, vocab).map(|(p, end)| {
        at = end;
        p
    });
    let mut size = Rational64::from_integer(1);
    if let Some((n, d)) = tokens.get(at).and_then(|t| size_multiplier(t)) {
        size = Rational64::new(n, d);
        at += 1;
    }
    let unit = match match_unit(tokens, at, vocab) {
        Some((unit, end)) => {
            at = end;
            unit
        }
        None => NO_UNIT.to_string(),
    };
    if tokens.get(at).map(String::as_str) == Some("of") {
        at += 1;
    }
    UnitPhrase {
        unit,
        size_multiplier: size,
        parenthetical,
        remainder: tokens[at..].to_vec(),
    }
}

/// Words sitting where a unit belongs that are not units: a leftover
/// parenthetical, or a single unknown word followed by `of` ("1 flibber of jam").
fn unit_position_violation(phrase: &UnitPhrase) -> Option<Vec<String>> {
    let rest = &phrase.remainder;
    if rest.first().map(String::as_str) == Some("(") {
        let close = rest.iter().position(|t| t == ")").map_or(rest.len(), |c| c + 1);
        return Some(rest[..close].to_vec());
    }
    if phrase.unit == NO_UNIT && rest.len() >= 3 && rest[1] == "of" {
        return Some(rest[..2].to_vec());
    }
    None
}

/// Name tokens up to the first comma, with parenthesized notes removed.
fn name_from(rest: &[String]) -> String {
    let mut depth = 0usize;
    let mut words = Vec::new();
    for t in rest {
        match t.as_str() {
            "," if depth == 0 => break,
            "(" => depth += 1,
            ")" => depth = depth.saturating_sub(1),
            _ if depth == 0 => words.push(t.as_str()),
            _ => {}
        }
    }
    words.join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineParse {
    Parsed(ParsedIngredientLine),
    /// No usable quantity field ("some salt"); the ingredient is ignored.
    NoQuantity,
    /// Words between the quantity and the name that are not units.
    UnknownUnitWords(Vec<String>),
    /// A quantity and unit with nothing after them ("2 cups"); ignored like `NoQuantity`.
    MissingName,
}

pub fn parse_ingredient_line(raw: &str, vocab: &UnitVocabulary) -> LineParse {
    let tokens = tokenize(raw);
    let (quantity, next) = match parse_quantity_prefix(&tokens) {
        Ok(parsed) => parsed,
        Err(e) => {
            log::debug!("no quantity in {raw:?}: {e}");
            return LineParse::NoQuantity;
        }
    };
    let phrase = parse_unit_phrase(&tokens[next..], vocab);
    if let Some(words) = unit_position_violation(&phrase) {
        return LineParse::UnknownUnitWords(words);
    }
    let name = name_from(&phrase.remainder);
    if name.is_empty() {
        return LineParse::MissingName;
    }
    LineParse::Parsed(ParsedIngredientLine {
        quantity,
        unit: phrase.unit,
        size_multiplier: phrase.size_multiplier,
        parenthetical: phrase.parenthetical,
        ingredient_name: name,
        raw: raw.to_string(),
    })
}

/// A recipe whose kept lines all parsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRecipe {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub lines: Vec<ParsedIngredientLine>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("recipe has no quantity-bearing ingredient lines")]
pub struct EmptyRecipe;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecipeFilter {
    Kept(Vec<ParsedIngredientLine>),
    Dropped { line: usize, words: Vec<String> },
}

/// Keeps a recipe only when every quantity-bearing line has a recognized unit
/// phrase. Lines without a quantity are dropped from the recipe.
pub fn filter_recipe_units<S: AsRef<str>>(lines: &[S], vocab: &UnitVocabulary) -> Result<RecipeFilter, EmptyRecipe> {
    let mut kept = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        match parse_ingredient_line(line.as_ref(), vocab) {
            LineParse::Parsed(p) => kept.push(p),
            LineParse::NoQuantity | LineParse::MissingName => {}
            LineParse::UnknownUnitWords(words) => return Ok(RecipeFilter::Dropped { line: i, words }),
        }
    }
    if kept.is_empty() {
        Err(EmptyRecipe)
    } else {
        Ok(RecipeFilter::Kept(kept))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn parsed(raw: &str) -> ParsedIngredientLine {
        match parse_ingredient_line(raw, &UnitVocabulary::bundled()) {
            LineParse::Parsed(p) => p,
            other => panic!("{raw:?} did not parse: {other:?}"),
        }
    }

    #[test]
    fn quantity_forms() {
        assert_eq!(
            parse_quantity("24-25").unwrap(),
            Quantity {
                value: r(49, 2),
                range_width: r(1, 1)
            }
        );
        assert_eq!(parse_quantity("1/2").unwrap(), Quantity::exact(r(1, 2)));
        assert_eq!(parse_quantity("15 1/4").unwrap(), Quantity::exact(r(61, 4)));
        assert_eq!(parse_quantity("2.5").unwrap(), Quantity::exact(r(5, 2)));
        assert_eq!(parse_quantity(".25 cup").unwrap(), Quantity::exact(r(1, 4)));
        assert_eq!(parse_quantity("3").unwrap(), Quantity::exact(r(3, 1)));
        assert_eq!(parse_quantity("3/2").unwrap(), Quantity::exact(r(3, 2)));
    }

    #[test]
    fn range_spellings_agree() {
        let expected = Quantity::range(r(2, 1), r(3, 1));
        for text in ["2-3", "2 - 3", "2\u{2013}3", "2 to 3", "2 \u{2014} 3"] {
            assert_eq!(parse_quantity(text).unwrap(), expected, "{text}");
        }
        let mixed = parse_quantity("1 1/2-2").unwrap();
        assert_eq!(mixed, Quantity::range(r(3, 2), r(2, 1)));
    }

    #[test]
    fn unicode_fractions() {
        assert_eq!(parse_quantity("½").unwrap(), Quantity::exact(r(1, 2)));
        assert_eq!(parse_quantity("1½").unwrap(), Quantity::exact(r(3, 2)));
        assert_eq!(parse_quantity("2 ¾ cups").unwrap(), Quantity::exact(r(11, 4)));
        assert_eq!(parse_quantity("1\u{2044}3").unwrap(), Quantity::exact(r(1, 3)));
        assert_eq!(tokenize("⅓cup"), vec!["1/3", "cup"]);
    }

    #[test]
    fn quantity_errors() {
        assert_eq!(
            parse_quantity("some salt"),
            Err(QuantityError::NotAQuantity("some".into()))
        );
        assert_eq!(parse_quantity("3/0"), Err(QuantityError::ZeroDenominator("3/0".into())));
        assert!(matches!(parse_quantity("5-2"), Err(QuantityError::InvertedRange(_))));
        assert!(matches!(parse_quantity(""), Err(QuantityError::NotAQuantity(_))));
        assert!(matches!(parse_quantity("1.2.3"), Err(QuantityError::NotAQuantity(_))));
    }

    #[test]
    fn tokenizer_keeps_parentheses_and_commas() {
        assert_eq!(
            toks("1 (15 1/4 ounce) Box"),
            vec!["1", "(", "15", "1/4", "ounce", ")", "box"]
        );
        assert_eq!(toks("2 onions, chopped."), vec!["2", "onions", ",", "chopped"]);
        assert_eq!(toks("low-fat milk"), vec!["low-fat", "milk"]);
    }

    #[test]
    fn unit_phrase_with_parenthetical() {
        let vocab = UnitVocabulary::bundled();
        let phrase = parse_unit_phrase(&toks("( 15 1/4 ounce ) box of cake mix"), &vocab);
        assert_eq!(
            phrase.parenthetical,
            Some(Parenthetical {
                quantity: Quantity::exact(r(61, 4)),
                unit: "ounce".into()
            })
        );
        assert_eq!(phrase.unit, "box");
        assert_eq!(phrase.remainder, toks("cake mix"));
    }

    #[test]
    fn unit_phrase_size_words() {
        let vocab = UnitVocabulary::bundled();
        let large = parse_unit_phrase(&toks("large onion"), &vocab);
        assert_eq!((large.unit.as_str(), large.size_multiplier), (NO_UNIT, r(6, 5)));
        assert_eq!(large.remainder, toks("onion"));
        let big = parse_unit_phrase(&toks("big potato"), &vocab);
        assert_eq!(big.size_multiplier, r(6, 5));
        let small = parse_unit_phrase(&toks("small scoop of ice cream"), &vocab);
        assert_eq!((small.unit.as_str(), small.size_multiplier), ("scoop", r(4, 5)));
        assert_eq!(small.remainder, toks("ice cream"));
        let medium = parse_unit_phrase(&toks("medium tomato"), &vocab);
        assert_eq!(medium.size_multiplier, r(1, 1));
        let plain = parse_unit_phrase(&toks("apples"), &vocab);
        assert_eq!((plain.unit.as_str(), plain.size_multiplier), (NO_UNIT, r(1, 1)));
        assert_eq!(plain.remainder, toks("apples"));
    }

    #[test]
    fn whole_lines() {
        let apples = parsed("2 apples");
        assert_eq!(apples.quantity, Quantity::exact(r(2, 1)));
        assert_eq!(apples.unit, NO_UNIT);
        assert_eq!(apples.ingredient_name, "apples");

        let ravioli = parsed("24-25 ounce cheese_ravioli");
        assert_eq!(
            ravioli.quantity,
            Quantity {
                value: r(49, 2),
                range_width: r(1, 1)
            }
        );
        assert_eq!(ravioli.unit, "ounce");
        assert_eq!(ravioli.ingredient_name, "cheese_ravioli");

        let cake = parsed("1 (15 1/4 ounce) box of cake mix");
        assert_eq!(cake.unit, "box");
        assert_eq!(cake.parenthetical.unwrap().unit, "ounce");
        assert_eq!(cake.ingredient_name, "cake mix");

        let beans = parsed("1 large can of beans");
        assert_eq!((beans.unit.as_str(), beans.size_multiplier), ("can", r(6, 5)));

        let milk = parsed("2 fluid ounces milk");
        assert_eq!(milk.unit, "fluid_ounce");

        let onion = parsed("2 cups onions, finely chopped (about 2 medium)");
        assert_eq!((onion.unit.as_str(), onion.ingredient_name.as_str()), ("cup", "onions"));

        let soup = parsed("1 can cream of mushroom soup");
        assert_eq!(soup.ingredient_name, "cream of mushroom soup");
    }

    #[test]
    fn line_outcomes() {
        let vocab = UnitVocabulary::bundled();
        assert_eq!(parse_ingredient_line("some salt", &vocab), LineParse::NoQuantity);
        assert_eq!(parse_ingredient_line("salt to taste", &vocab), LineParse::NoQuantity);
        assert_eq!(
            parse_ingredient_line("1 flibber of jam", &vocab),
            LineParse::UnknownUnitWords(vec!["flibber".into(), "of".into()])
        );
        assert_eq!(parse_ingredient_line("2 cups", &vocab), LineParse::MissingName);
        // repeated and unreadable parentheticals sit in unit position
        assert!(matches!(
            parse_ingredient_line("1 (15 ounce) (2 cup) box of cake mix", &vocab),
            LineParse::UnknownUnitWords(_)
        ));
        assert!(matches!(
            parse_ingredient_line("1 (optional) egg", &vocab),
            LineParse::UnknownUnitWords(_)
        ));
        assert_eq!(parse_ingredient_line("1/0 cup flour", &vocab), LineParse::NoQuantity);
    }

    #[test]
    fn recipe_filter() {
        let vocab = UnitVocabulary::bundled();
        match filter_recipe_units(&["2 apples", "some salt"], &vocab).unwrap() {
            RecipeFilter::Kept(lines) => {
                assert_eq!(lines.len(), 1);
                assert_eq!(lines[0].ingredient_name, "apples");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            filter_recipe_units(&["2 apples", "1 flibber of jam"], &vocab),
            Ok(RecipeFilter::Dropped { line: 1, .. })
        ));
        assert_eq!(filter_recipe_units(&["some salt"], &vocab), Err(EmptyRecipe));
        assert_eq!(filter_recipe_units::<&str>(&[], &vocab), Err(EmptyRecipe));
    }

    #[test]
    fn render_reads_back() {
        for raw in [
            "24-25 ounce cheese_ravioli",
            "1 (15 1/4 ounce) box cake mix",
            "2 large eggs",
            "1/2 cup sugar",
        ] {
            let line = parsed(raw);
            let again = parsed(&line.render());
            assert_eq!(
                (
                    again.quantity,
                    &again.unit,
                    again.size_multiplier,
                    &again.parenthetical,
                    &again.ingredient_name
                ),
                (
                    line.quantity,
                    &line.unit,
                    line.size_multiplier,
                    &line.parenthetical,
                    &line.ingredient_name
                ),
            );
        }
    }
}
