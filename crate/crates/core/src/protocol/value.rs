//! Values carried in the optional `data` map of an event message.

use std::collections::BTreeMap;
use std::fmt;

/// Largest magnitude a data number may have. Below this bound every
/// six-decimal quantity survives a text round-trip unchanged.
pub const NUM_LIMIT: f64 = 2_147_483_648.0;

/// A finite number quantized to at most six fractional digits.
///
/// Quantization happens on construction, so every `Num` encodes to the
/// same text it was parsed from.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Num(f64);

impl Num {
    /// Returns `None` for non-finite values or magnitudes above [`NUM_LIMIT`].
    pub fn new(value: f64) -> Option<Num> {
        if !value.is_finite() || value.abs() > NUM_LIMIT {
            return None;
        }
        let quantized: f64 = format!("{value:.6}").parse().ok()?;
        // collapse -0 so it cannot leak into the canonical text
        Some(Num(if quantized == 0.0 { 0.0 } else { quantized }))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0.fract() == 0.0
    }

    /// Canonical decimal text: fixed six digits with trailing zeros trimmed.
    pub fn canonical(self) -> String {
        let mut text = format!("{:.6}", self.0);
        while text.ends_with('0') {
            text.pop();
        }
        if text.ends_with('.') {
            text.pop();
        }
        if text == "-0" {
            text = "0".to_string();
        }
        text
    }
}

impl TryFrom<f64> for Num {
    type Error = f64;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Num::new(value).ok_or(value)
    }
}

impl From<i32> for Num {
    fn from(value: i32) -> Self {
        Num(f64::from(value))
    }
}

impl From<u16> for Num {
    fn from(value: u16) -> Self {
        Num(f64::from(value))
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Number(Num),
    String(String),
    Bool(bool),
}

/// A data value: a scalar or a flat array of scalars.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Scalar(Scalar),
    Array(Vec<Scalar>),
}

impl Value {
    /// Builds a number value, panicking on non-finite or oversized input.
    /// Use [`Num::new`] when the input is untrusted.
    pub fn num(value: f64) -> Value {
        let num = Num::new(value).unwrap_or_else(|| panic!("invalid data number {value}"));
        Value::Scalar(Scalar::Number(num))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Scalar(Scalar::Number(n)) => Some(n.get()),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Scalar(Scalar::String(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Scalar(Scalar::Bool(b)) => Some(*b),
            _ => None,
        }
    }

    /// Numbers of an all-number array.
    pub fn as_numbers(&self) -> Option<Vec<f64>> {
        match self {
            Value::Array(items) => items
                .iter()
                .map(|item| match item {
                    Scalar::Number(n) => Some(n.get()),
                    _ => None,
                })
                .collect(),
            _ => None,
        }
    }

    /// Whether the value has the given shape.
    pub fn conforms(&self, kind: DataKind) -> bool {
        match kind {
            DataKind::Number => self.as_num().is_some(),
            DataKind::Integer => matches!(self, Value::Scalar(Scalar::Number(n)) if n.is_integer()),
            DataKind::String => self.as_str().is_some(),
            DataKind::Bool => self.as_bool().is_some(),
            DataKind::NumberArray => self.as_numbers().is_some(),
        }
    }
}

impl From<Num> for Value {
    fn from(value: Num) -> Self {
        Value::Scalar(Scalar::Number(value))
    }
}

impl From<i32> for Value {
    fn from(value: i32) -> Self {
        Value::Scalar(Scalar::Number(Num::from(value)))
    }
}

impl From<&str> for Value {
    fn from(value: &str) -> Self {
        Value::Scalar(Scalar::String(value.to_string()))
    }
}

impl From<String> for Value {
    fn from(value: String) -> Self {
        Value::Scalar(Scalar::String(value))
    }
}

impl From<bool> for Value {
    fn from(value: bool) -> Self {
        Value::Scalar(Scalar::Bool(value))
    }
}

impl From<Vec<Num>> for Value {
    fn from(values: Vec<Num>) -> Self {
        Value::Array(values.into_iter().map(Scalar::Number).collect())
    }
}

/// The `data` map. Keys are kept sorted, which fixes their wire order.
pub type Data = BTreeMap<String, Value>;

/// Semantic type of a data key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Number,
    Integer,
    String,
    Bool,
    NumberArray,
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataKind::Number => "number",
            DataKind::Integer => "integer",
            DataKind::String => "string",
            DataKind::Bool => "boolean",
            DataKind::NumberArray => "number array",
        })
    }
}
