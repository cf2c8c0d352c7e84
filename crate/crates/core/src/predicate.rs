//! Data-based selection and join predicates.
//!
//! Predicates reference only data columns, never quality trails. Comparisons
//! involving a null evaluate to false; integer and real operands compare
//! numerically, text compares lexicographically, and mixing text with
//! numbers is a type error.

use std::cmp::Ordering;

use crate::error::PlanError;
use crate::relation::Schema;
use crate::value::{ColumnType, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn parse(s: &str) -> Option<CmpOp> {
        match s {
            "eq" | "=" | "==" => Some(CmpOp::Eq),
            "ne" | "!=" | "<>" => Some(CmpOp::Ne),
            "lt" | "<" => Some(CmpOp::Lt),
            "le" | "<=" => Some(CmpOp::Le),
            "gt" | ">" => Some(CmpOp::Gt),
            "ge" | ">=" => Some(CmpOp::Ge),
            _ => None,
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

/// Right-hand side of a comparison: another column or a literal.
#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(String),
    Literal(Value),
}

/// Boolean expression tree over column references and literals.
///
/// The conjunction of zero predicates is TRUE, so `Predicate::always_true()`
/// covers the degenerate cases (cross product, `p = TRUE` selections).
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Cmp {
        op: CmpOp,
        column: String,
        rhs: Operand,
    },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

fn comparable(a: ColumnType, b: ColumnType) -> bool {
    matches!(
        (a, b),
        (ColumnType::Int | ColumnType::Real, ColumnType::Int | ColumnType::Real)
            | (ColumnType::Text, ColumnType::Text)
    )
}

fn literal_type(v: &Value) -> Option<ColumnType> {
    match v {
        Value::Int(_) => Some(ColumnType::Int),
        Value::Real(_) => Some(ColumnType::Real),
        Value::Text(_) => Some(ColumnType::Text),
        Value::Null => None,
    }
}

/// Compares two non-null values, promoting int/real pairs numerically.
fn compare(a: &Value, b: &Value) -> Result<Ordering, PlanError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
        (Value::Real(x), Value::Real(y)) => Ok(x.total_cmp(y)),
        (Value::Int(x), Value::Real(y)) => Ok((*x as f64).total_cmp(y)),
        (Value::Real(x), Value::Int(y)) => Ok(x.total_cmp(&(*y as f64))),
        (Value::Text(x), Value::Text(y)) => Ok(x.cmp(y)),
        _ => Err(PlanError::TypeMismatch(format!(
            "cannot compare '{a}' with '{b}'"
        ))),
    }
}

impl Predicate {
    pub fn always_true() -> Predicate {
        Predicate::And(Vec::new())
    }

    pub fn cmp_lit(op: CmpOp, column: impl Into<String>, lit: Value) -> Predicate {
        Predicate::Cmp {
            op,
            column: column.into(),
            rhs: Operand::Literal(lit),
        }
    }

    pub fn cmp_cols(op: CmpOp, left: impl Into<String>, right: impl Into<String>) -> Predicate {
        Predicate::Cmp {
            op,
            column: left.into(),
            rhs: Operand::Column(right.into()),
        }
    }

    /// Checks column existence (unambiguously) and comparison typing
    /// against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<(), PlanError> {
        match self {
            Predicate::Cmp { column, rhs, .. } => {
                let li = schema.col_index_unique(column)?;
                let lt = schema.columns()[li].ty;
                match rhs {
                    Operand::Column(rc) => {
                        let ri = schema.col_index_unique(rc)?;
                        let rt = schema.columns()[ri].ty;
                        if !comparable(lt, rt) {
                            return Err(PlanError::TypeMismatch(format!(
                                "cannot compare column '{column}' ({lt}) with '{rc}' ({rt})"
                            )));
                        }
                    }
                    Operand::Literal(v) => {
                        if let Some(vt) = literal_type(v) {
                            if !comparable(lt, vt) {
                                return Err(PlanError::TypeMismatch(format!(
                                    "cannot compare column '{column}' ({lt}) with {vt} literal"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps.iter().try_for_each(|p| p.validate(schema))
            }
            Predicate::Not(p) => p.validate(schema),
        }
    }

    /// Evaluates against one data row. Null operands make any comparison
    /// false.
    pub fn eval(&self, schema: &Schema, row: &[Value]) -> Result<bool, PlanError> {
        match self {
            Predicate::Cmp { op, column, rhs } => {
                let left = &row[schema.col_index_unique(column)?];
                let right = match rhs {
                    Operand::Column(rc) => &row[schema.col_index_unique(rc)?],
                    Operand::Literal(v) => v,
                };
                if left.is_null() || right.is_null() {
                    return Ok(false);
                }
                Ok(op.holds(compare(left, right)?))
            }
            Predicate::And(ps) => {
                for p in ps {
                    if !p.eval(schema, row)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Predicate::Or(ps) => {
                for p in ps {
                    if p.eval(schema, row)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Predicate::Not(p) => Ok(!p.eval(schema, row)?),
        }
    }

    /// Columns referenced anywhere in this predicate.
    pub fn referenced_columns(&self, out: &mut Vec<String>) {
        match self {
            Predicate::Cmp { column, rhs, .. } => {
                out.push(column.clone());
                if let Operand::Column(rc) = rhs {
                    out.push(rc.clone());
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps.iter().for_each(|p| p.referenced_columns(out))
            }
            Predicate::Not(p) => p.referenced_columns(out),
        }
    }

    /// If the predicate is a conjunction of column-column equalities, the
    /// (left, right) column name pairs; used for hash-join acceleration.
    pub(crate) fn equi_pairs(&self) -> Option<Vec<(String, String)>> {
        fn collect(p: &Predicate, out: &mut Vec<(String, String)>) -> bool {
            match p {
                Predicate::Cmp {
                    op: CmpOp::Eq,
                    column,
                    rhs: Operand::Column(rc),
                } => {
                    out.push((column.clone(), rc.clone()));
                    true
                }
                Predicate::And(ps) if !ps.is_empty() => {
                    ps.iter().all(|p| collect(p, out))
                }
                _ => false,
            }
        }
        let mut out = Vec::new();
        if collect(self, &mut out) {
            Some(out)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::Column;

    fn schema() -> Schema {
        Schema::new(vec![
            Column::new("a", ColumnType::Int),
            Column::new("b", ColumnType::Real),
            Column::new("c", ColumnType::Text),
        ])
    }

    #[test]
    fn comparisons_follow_sql_conventions() {
        let s = schema();
        let row = vec![Value::Int(3), Value::Real(2.5), Value::Text("x".into())];

        let p = Predicate::cmp_lit(CmpOp::Gt, "a", Value::Int(2));
        assert!(p.eval(&s, &row).unwrap());

        // Cross numeric comparison promotes to real.
        let p = Predicate::cmp_lit(CmpOp::Lt, "a", Value::Real(3.5));
        assert!(p.eval(&s, &row).unwrap());

        // Column-column.
        let p = Predicate::cmp_cols(CmpOp::Gt, "a", "b");
        assert!(p.eval(&s, &row).unwrap());

        let p = Predicate::cmp_lit(CmpOp::Eq, "c", Value::Text("x".into()));
        assert!(p.eval(&s, &row).unwrap());
    }

    #[test]
    fn null_comparisons_are_false() {
        let s = schema();
        let row = vec![Value::Null, Value::Real(1.0), Value::Text("x".into())];
        for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Ge] {
            let p = Predicate::cmp_lit(op, "a", Value::Int(1));
            assert!(!p.eval(&s, &row).unwrap());
        }
        let p = Predicate::cmp_lit(CmpOp::Eq, "a", Value::Null);
        assert!(!p.eval(&s, &row).unwrap());
    }

    #[test]
    fn type_mismatch_detected_at_validation() {
        let s = schema();
        let p = Predicate::cmp_lit(CmpOp::Eq, "a", Value::Text("1".into()));
        assert!(matches!(p.validate(&s), Err(PlanError::TypeMismatch(_))));
        let p = Predicate::cmp_cols(CmpOp::Eq, "a", "c");
        assert!(p.validate(&s).is_err());
        let p = Predicate::cmp_lit(CmpOp::Eq, "missing", Value::Int(1));
        assert!(matches!(p.validate(&s), Err(PlanError::UnknownColumn(_))));
    }

    #[test]
    fn boolean_composition() {
        let s = schema();
        let row = vec![Value::Int(3), Value::Real(2.5), Value::Text("x".into())];
        let p = Predicate::And(vec![
            Predicate::cmp_lit(CmpOp::Gt, "a", Value::Int(1)),
            Predicate::Not(Box::new(Predicate::cmp_lit(
                CmpOp::Eq,
                "c",
                Value::Text("y".into()),
            ))),
        ]);
        assert!(p.eval(&s, &row).unwrap());
        assert!(Predicate::always_true().eval(&s, &row).unwrap());
        assert!(!Predicate::Or(vec![]).eval(&s, &row).unwrap());
    }

    #[test]
    fn equi_pair_extraction() {
        let p = Predicate::And(vec![
            Predicate::cmp_cols(CmpOp::Eq, "a", "x"),
            Predicate::cmp_cols(CmpOp::Eq, "b", "y"),
        ]);
        assert_eq!(
            p.equi_pairs().unwrap(),
            vec![("a".into(), "x".into()), ("b".into(), "y".into())]
        );
        assert!(Predicate::cmp_lit(CmpOp::Eq, "a", Value::Int(1))
            .equi_pairs()
            .is_none());
        assert!(Predicate::always_true().equi_pairs().is_none());
    }
}
