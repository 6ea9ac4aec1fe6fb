//! Serializes exact rationals as `"p/q"` strings (`"3"` when the denominator is 1).

use num_rational::Rational64;
use serde::{de::Error, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(value: &Rational64, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_str(value)
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational64, D::Error> {
    let text = String::deserialize(deserializer)?;
    let parsed = match text.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(D::Error::custom)?;
            let d: i64 = d.trim().parse().map_err(D::Error::custom)?;
            if d == 0 {
                return Err(D::Error::custom(format!("zero denominator in `{text}`")));
            }
            Rational64::new(n, d)
        }
        None => Rational64::from_integer(text.trim().parse().map_err(D::Error::custom)?),
    };
    Ok(parsed)
}
