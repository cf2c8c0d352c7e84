//! Data cell values and column types.

use std::cmp::Ordering;
use std::fmt;

/// Declared type of a data column. Any column may additionally hold nulls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Real,
    Text,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int => write!(f, "int"),
            ColumnType::Real => write!(f, "real"),
            ColumnType::Text => write!(f, "text"),
        }
    }
}

/// A single data cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Null,
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// True iff the value may live in a column of the given type.
    pub fn conforms_to(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Value::Int(_), ColumnType::Int)
                | (Value::Real(_), ColumnType::Real)
                | (Value::Text(_), ColumnType::Text)
                | (Value::Null, _)
        )
    }

    /// Renders the value as a CSV cell: decimal integers, reals always with
    /// a decimal point or exponent, text verbatim, null as the empty field.
    pub fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(r) => {
                let s = r.to_string();
                if s.contains('.') || s.contains('e') || s.contains('E') {
                    s
                } else {
                    format!("{s}.0")
                }
            }
            Value::Text(t) => t.clone(),
            Value::Null => String::new(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Grouping key form of a value: hashable and totally ordered, with null
/// equal to null and reals compared by normalized bit pattern
/// (`-0.0` folds to `0.0`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyValue {
    Null,
    Int(i64),
    Real(u64),
    Text(String),
}

impl From<&Value> for KeyValue {
    fn from(v: &Value) -> Self {
        match v {
            Value::Int(i) => KeyValue::Int(*i),
            Value::Real(r) => {
                let r = if *r == 0.0 { 0.0 } else { *r };
                KeyValue::Real(r.to_bits())
            }
            Value::Text(t) => KeyValue::Text(t.clone()),
            Value::Null => KeyValue::Null,
        }
    }
}

/// Grouping key for a whole data row.
pub fn row_key(values: &[Value]) -> Vec<KeyValue> {
    values.iter().map(KeyValue::from).collect()
}

/// Total order over values for deterministic output: null < int < real < text.
pub fn cmp_values(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Null => 0,
            Value::Int(_) => 1,
            Value::Real(_) => 2,
            Value::Text(_) => 3,
        }
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Real(x), Value::Real(y)) => x.total_cmp(y),
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}
