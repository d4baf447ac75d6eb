//! Text form of reals in tables and reports: 12 significant digits, `inf`
//! for infinities, `.` as the decimal point.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits, dropping trailing zeros.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exponent) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exponent)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Inverse of [`format_real`].
pub fn parse_real(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        other => other.parse().ok(),
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_real(x: f64) -> f64 {
    parse_real(&format_real(x)).unwrap_or(x)
}

/// Serde adapter writing finite reals as JSON numbers rounded to 12
/// significant digits and non-finite ones as strings.
pub mod real {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            serializer.serialize_f64(round_real(*x))
        } else {
            serializer.serialize_str(&format_real(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        match Repr::deserialize(deserializer)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(s) => parse_real(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("not a real: {s}"))),
        }
    }
}

/// [`real`] for `Option<f64>`.
pub mod opt_real {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "real")] f64);

    pub fn serialize<S: Serializer>(x: &Option<f64>, serializer: S) -> Result<S::Ok, S::Error> {
        x.map(Wrap).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(deserializer)?.map(|w| w.0))
    }
}
