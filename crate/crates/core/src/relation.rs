//! Quality-annotated relations: schemas, tuples, and result fingerprints.

use std::fmt::Write as _;

use crate::error::PlanError;
use crate::merge::canonicalize;
use crate::trail::QualityTrail;
use crate::value::{ColumnType, Value};

/// A named, typed column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered list of columns.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Self {
        Schema { columns }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    /// Index of the first column with this name.
    pub fn col_index(&self, name: &str) -> Result<usize, PlanError> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| PlanError::UnknownColumn(name.to_string()))
    }

    /// Index of the column with this name, rejecting ambiguous references
    /// (a name that appears more than once, e.g. after a join).
    pub fn col_index_unique(&self, name: &str) -> Result<usize, PlanError> {
        let mut found = None;
        for (i, c) in self.columns.iter().enumerate() {
            if c.name == name {
                if found.is_some() {
                    return Err(PlanError::AmbiguousColumn(name.to_string()));
                }
                found = Some(i);
            }
        }
        found.ok_or_else(|| PlanError::UnknownColumn(name.to_string()))
    }

    /// Same arity and column types, names ignored.
    pub fn union_compatible(&self, other: &Schema) -> Result<(), PlanError> {
        if self.arity() != other.arity() {
            return Err(PlanError::SchemaMismatch(format!(
                "arity {} vs {}",
                self.arity(),
                other.arity()
            )));
        }
        for (a, b) in self.columns.iter().zip(other.columns.iter()) {
            if a.ty != b.ty {
                return Err(PlanError::SchemaMismatch(format!(
                    "column '{}' is {} but '{}' is {}",
                    a.name, a.ty, b.name, b.ty
                )));
            }
        }
        Ok(())
    }
}

/// A data tuple with exactly one quality trail.
#[derive(Debug, Clone, PartialEq)]
pub struct QTuple {
    pub values: Vec<Value>,
    pub trail: QualityTrail,
}

impl QTuple {
    pub fn new(values: Vec<Value>, trail: QualityTrail) -> Self {
        QTuple { values, trail }
    }
}

/// An ordered multiset of quality-annotated tuples conforming to a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    schema: Schema,
    tuples: Vec<QTuple>,
}

impl Relation {
    pub fn new(schema: Schema) -> Self {
        Relation {
            schema,
            tuples: Vec::new(),
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn tuples(&self) -> &[QTuple] {
        &self.tuples
    }

    pub fn into_tuples(self) -> Vec<QTuple> {
        self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Appends a tuple after checking schema conformance.
    pub fn push(&mut self, tuple: QTuple) -> Result<(), PlanError> {
        if tuple.values.len() != self.schema.arity() {
            return Err(PlanError::TypeMismatch(format!(
                "tuple arity {} does not match schema arity {}",
                tuple.values.len(),
                self.schema.arity()
            )));
        }
        for (v, c) in tuple.values.iter().zip(self.schema.columns()) {
            if !v.conforms_to(c.ty) {
                return Err(PlanError::TypeMismatch(format!(
                    "value '{}' does not fit column '{}' of type {}",
                    v, c.name, c.ty
                )));
            }
        }
        self.tuples.push(tuple);
        Ok(())
    }

    /// Appends without conformance checks; callers guarantee the tuple was
    /// produced against this schema.
    pub(crate) fn push_unchecked(&mut self, tuple: QTuple) {
        self.tuples.push(tuple);
    }

    /// Order-insensitive result identity: the sorted multiset of
    /// (data values, canonical trail) encodings. Two relations are the same
    /// query answer iff their fingerprints are equal.
    pub fn fingerprint(&self) -> Vec<String> {
        let mut rows: Vec<String> = self
            .tuples
            .iter()
            .map(|t| {
                let mut row = String::new();
                for v in &t.values {
                    match v {
                        Value::Int(i) => write!(row, "i:{i}"),
                        Value::Real(r) => write!(row, "r:{}", r.to_bits()),
                        Value::Text(s) => write!(row, "t:{}:{s}", s.len()),
                        Value::Null => write!(row, "n"),
                    }
                    .expect("write to String cannot fail");
                    row.push('\u{1f}');
                }
                row.push_str(&canonicalize(&t.trail).fingerprint());
                row
            })
            .collect();
        rows.sort_unstable();
        rows
    }
}
