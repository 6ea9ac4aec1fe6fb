//! Compile raw recipe ingredient lines into normalized per-ingredient gram
//! amounts, train relative-amount prediction heads over feature vectors, and
//! evaluate predictions.
//!
//! Stages, in pipeline order:
//!
//! - [`quantity_parser`]: quantity, unit phrase and name from each line
//! - [`canonicalizer`]: merge raw names into a canonical vocabulary
//! - [`unit_converter`]: grams per (ingredient, unit), calorie densities
//! - [`vectorizer`]: amount and range vectors normalized to a constant
//! - [`amount_models`]: dense (softmax + cross-entropy) and sparse (ReLU + L1) heads
//! - [`metrics_eval`]: recall, IoU, range-aware L1 error, relative calorie error
//! - [`pipeline`]: file-based stages behind the command-line tool

// `!(x > 0.0)` is used deliberately so NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amount_models;
pub mod canonicalizer;
pub mod io;
pub mod metrics_eval;
pub mod pipeline;
pub mod quantity_parser;
mod ratio_serde;
pub mod synthetic;
pub mod unit_converter;
pub mod units;
pub mod vectorizer;

pub use quantity_parser::{parse_ingredient_line, parse_quantity, LineParse, ParsedIngredientLine, Quantity};
pub use units::{UnitVocabulary, NO_UNIT};
