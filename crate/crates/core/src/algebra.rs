//! The extended relational operators.
//!
//! Selection and projection pass quality trails through untouched. Join
//! outputs inherit the merge of their parents' trails; outer-join-preserved
//! tuples keep their own trail. Set operators deduplicate each input first
//! (merging duplicate trails), then merge across sides only for rows present
//! in both. All operators use bag semantics except the set operators and
//! `distinct`.

use std::collections::HashMap;

use crate::error::PlanError;
use crate::merge::merge;
use crate::predicate::Predicate;
use crate::relation::{Column, QTuple, Relation, Schema};
use crate::trail::QualityTrail;
use crate::value::{row_key, KeyValue, Value};

/// Which side(s) an outer join preserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterKind {
    Left,
    Right,
    Full,
}

pub fn select(rel: &Relation, pred: &Predicate) -> Result<Relation, PlanError> {
    pred.validate(rel.schema())?;
    let mut out = Relation::new(rel.schema().clone());
    for t in rel.tuples() {
        if pred.eval(rel.schema(), &t.values)? {
            out.push_unchecked(t.clone());
        }
    }
    Ok(out)
}

/// Column projection. Duplicate column names in `cols` are allowed; trails
/// are unchanged and duplicates in the data are kept (bag semantics).
pub fn project(rel: &Relation, cols: &[String]) -> Result<Relation, PlanError> {
    let indices: Vec<usize> = cols
        .iter()
        .map(|c| rel.schema().col_index(c))
        .collect::<Result<_, _>>()?;
    let schema = Schema::new(
        indices
            .iter()
            .map(|&i| rel.schema().columns()[i].clone())
            .collect(),
    );
    let mut out = Relation::new(schema);
    for t in rel.tuples() {
        let values = indices.iter().map(|&i| t.values[i].clone()).collect();
        out.push_unchecked(QTuple::new(values, t.trail.clone()));
    }
    Ok(out)
}

fn joined_trail(
    left: &QualityTrail,
    right: &QualityTrail,
    quality: bool,
) -> Result<QualityTrail, PlanError> {
    if quality {
        Ok(merge([left, right])?.into_trail())
    } else {
        Ok(left.clone())
    }
}

fn concat_schema(left: &Schema, right: &Schema) -> Schema {
    let mut cols = left.columns().to_vec();
    cols.extend_from_slice(right.columns());
    Schema::new(cols)
}

/// Inner join pairs under `pred`, as (left index, right index), in
/// deterministic left-major order. Uses a hash build on the right side when
/// the predicate is a conjunction of cross-side column equalities, and a
/// nested loop otherwise.
fn match_pairs(
    left: &Relation,
    right: &Relation,
    pred: &Predicate,
) -> Result<Vec<(usize, usize)>, PlanError> {
    let combined = concat_schema(left.schema(), right.schema());
    pred.validate(&combined)?;

    if let Some(pairs) = pred.equi_pairs() {
        // Each equality must reference one column per side.
        let mut keys = Vec::with_capacity(pairs.len());
        let mut splittable = true;
        for (a, b) in &pairs {
            let (la, ra) = (left.schema().col_index(a), right.schema().col_index(a));
            let (lb, rb) = (left.schema().col_index(b), right.schema().col_index(b));
            match (la, ra, lb, rb) {
                (Ok(li), Err(_), Err(_), Ok(ri)) | (Err(_), Ok(ri), Ok(li), Err(_)) => {
                    keys.push((li, ri));
                }
                _ => {
                    splittable = false;
                    break;
                }
            }
        }
        if splittable {
            return Ok(hash_match(left, right, &keys));
        }
    }

    let mut out = Vec::new();
    let mut row: Vec<Value> = Vec::with_capacity(combined.arity());
    for (li, l) in left.tuples().iter().enumerate() {
        for (ri, r) in right.tuples().iter().enumerate() {
            row.clear();
            row.extend_from_slice(&l.values);
            row.extend_from_slice(&r.values);
            if pred.eval(&combined, &row)? {
                out.push((li, ri));
            }
        }
    }
    Ok(out)
}

/// Equi-join matching: null keys never match (comparison-with-null is false).
fn hash_match(left: &Relation, right: &Relation, keys: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut table: HashMap<Vec<KeyValue>, Vec<usize>> = HashMap::new();
    'right: for (ri, r) in right.tuples().iter().enumerate() {
        let mut key = Vec::with_capacity(keys.len());
        for &(_, rk) in keys {
            if r.values[rk].is_null() {
                continue 'right;
            }
            key.push(KeyValue::from(&r.values[rk]));
        }
        table.entry(key).or_default().push(ri);
    }
    let mut out = Vec::new();
    'left: for (li, l) in left.tuples().iter().enumerate() {
        let mut key = Vec::with_capacity(keys.len());
        for &(lk, _) in keys {
            if l.values[lk].is_null() {
                continue 'left;
            }
            key.push(KeyValue::from(&l.values[lk]));
        }
        if let Some(ris) = table.get(&key) {
            out.extend(ris.iter().map(|&ri| (li, ri)));
        }
    }
    out.sort_unstable();
    out
}

pub fn theta_join(left: &Relation, right: &Relation, pred: &Predicate) -> Result<Relation, PlanError> {
    theta_join_impl(left, right, pred, true)
}

pub(crate) fn theta_join_impl(
    left: &Relation,
    right: &Relation,
    pred: &Predicate,
    quality: bool,
) -> Result<Relation, PlanError> {
    let mut out = Relation::new(concat_schema(left.schema(), right.schema()));
    for (li, ri) in match_pairs(left, right, pred)? {
        let l = &left.tuples()[li];
        let r = &right.tuples()[ri];
        let mut values = l.values.clone();
        values.extend_from_slice(&r.values);
        out.push_unchecked(QTuple::new(values, joined_trail(&l.trail, &r.trail, quality)?));
    }
    Ok(out)
}

/// Theta join with the always-true predicate.
pub fn cross_product(left: &Relation, right: &Relation) -> Result<Relation, PlanError> {
    theta_join(left, right, &Predicate::always_true())
}

pub(crate) fn cross_product_impl(
    left: &Relation,
    right: &Relation,
    quality: bool,
) -> Result<Relation, PlanError> {
    theta_join_impl(left, right, &Predicate::always_true(), quality)
}

/// Equality on all shared column names, shared columns emitted once (from
/// the left). Degenerates to the cross product when no columns are shared.
pub fn natural_join(left: &Relation, right: &Relation) -> Result<Relation, PlanError> {
    natural_join_impl(left, right, true)
}

pub(crate) fn natural_join_impl(
    left: &Relation,
    right: &Relation,
    quality: bool,
) -> Result<Relation, PlanError> {
    let shared: Vec<(usize, usize)> = left
        .schema()
        .columns()
        .iter()
        .enumerate()
        .filter_map(|(li, c)| {
            right
                .schema()
                .col_index(&c.name)
                .ok()
                .map(|ri| (li, ri))
        })
        .collect();
    if shared.is_empty() {
        return cross_product_impl(left, right, quality);
    }
    let right_keep: Vec<usize> = (0..right.schema().arity())
        .filter(|ri| !shared.iter().any(|&(_, srl)| srl == *ri))
        .collect();
    let mut cols = left.schema().columns().to_vec();
    cols.extend(right_keep.iter().map(|&ri| right.schema().columns()[ri].clone()));

    let mut out = Relation::new(Schema::new(cols));
    for (li, ri) in hash_match(left, right, &shared) {
        let l = &left.tuples()[li];
        let r = &right.tuples()[ri];
        let mut values = l.values.clone();
        values.extend(right_keep.iter().map(|&i| r.values[i].clone()));
        out.push_unchecked(QTuple::new(values, joined_trail(&l.trail, &r.trail, quality)?));
    }
    Ok(out)
}

/// Outer join: matched pairs behave like the theta join; preserved tuples
/// are padded with nulls and keep their own (unmerged) quality trail.
pub fn outer_join(
    left: &Relation,
    right: &Relation,
    pred: &Predicate,
    kind: OuterKind,
) -> Result<Relation, PlanError> {
    outer_join_impl(left, right, pred, kind, true)
}

pub(crate) fn outer_join_impl(
    left: &Relation,
    right: &Relation,
    pred: &Predicate,
    kind: OuterKind,
    quality: bool,
) -> Result<Relation, PlanError> {
    let pairs = match_pairs(left, right, pred)?;
    let mut left_matched = vec![false; left.len()];
    let mut right_matched = vec![false; right.len()];
    let mut out = Relation::new(concat_schema(left.schema(), right.schema()));

    for &(li, ri) in &pairs {
        left_matched[li] = true;
        right_matched[ri] = true;
        let l = &left.tuples()[li];
        let r = &right.tuples()[ri];
        let mut values = l.values.clone();
        values.extend_from_slice(&r.values);
        out.push_unchecked(QTuple::new(values, joined_trail(&l.trail, &r.trail, quality)?));
    }
    if matches!(kind, OuterKind::Left | OuterKind::Full) {
        for (li, l) in left.tuples().iter().enumerate() {
            if !left_matched[li] {
                let mut values = l.values.clone();
                values.extend(std::iter::repeat_n(Value::Null, right.schema().arity()));
                out.push_unchecked(QTuple::new(values, l.trail.clone()));
            }
        }
    }
    if matches!(kind, OuterKind::Right | OuterKind::Full) {
        for (ri, r) in right.tuples().iter().enumerate() {
            if !right_matched[ri] {
                let mut values: Vec<Value> =
                    std::iter::repeat_n(Value::Null, left.schema().arity()).collect();
                values.extend_from_slice(&r.values);
                out.push_unchecked(QTuple::new(values, r.trail.clone()));
            }
        }
    }
    Ok(out)
}

/// Collapses tuples identical in the data part (nulls equal for grouping);
/// each output trail is the merge of the group's trails.
pub fn distinct(rel: &Relation) -> Result<Relation, PlanError> {
    distinct_impl(rel, true)
}

pub(crate) fn distinct_impl(rel: &Relation, quality: bool) -> Result<Relation, PlanError> {
    let mut index: HashMap<Vec<KeyValue>, usize> = HashMap::new();
    let mut groups: Vec<(usize, Vec<&QualityTrail>)> = Vec::new();
    for (ti, t) in rel.tuples().iter().enumerate() {
        let key = row_key(&t.values);
        match index.get(&key) {
            Some(&gi) => groups[gi].1.push(&t.trail),
            None => {
                index.insert(key, groups.len());
                groups.push((ti, vec![&t.trail]));
            }
        }
    }
    let mut out = Relation::new(rel.schema().clone());
    for (first, trails) in groups {
        let trail = if quality {
            merge(trails.into_iter().map(|t| t as _))?.into_trail()
        } else {
            trails[0].clone()
        };
        out.push_unchecked(QTuple::new(rel.tuples()[first].values.clone(), trail));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SetOp {
    Union,
    Intersect,
    Difference,
}

fn set_op(
    left: &Relation,
    right: &Relation,
    op: SetOp,
    quality: bool,
) -> Result<Relation, PlanError> {
    left.schema().union_compatible(right.schema())?;
    let dl = distinct_impl(left, quality)?;
    let dr = distinct_impl(right, quality)?;

    let mut right_index: HashMap<Vec<KeyValue>, usize> = HashMap::new();
    for (ri, r) in dr.tuples().iter().enumerate() {
        right_index.insert(row_key(&r.values), ri);
    }

    let mut out = Relation::new(left.schema().clone());
    let mut right_used = vec![false; dr.len()];
    for l in dl.tuples() {
        let both = right_index.get(&row_key(&l.values)).copied();
        match (op, both) {
            // Row in both sides: merged trail.
            (SetOp::Union | SetOp::Intersect, Some(ri)) => {
                right_used[ri] = true;
                let trail = if quality {
                    merge([&l.trail, &dr.tuples()[ri].trail])?.into_trail()
                } else {
                    l.trail.clone()
                };
                out.push_unchecked(QTuple::new(l.values.clone(), trail));
            }
            // Row from one side only: its own trail.
            (SetOp::Union | SetOp::Difference, None) => {
                out.push_unchecked(l.clone());
            }
            (SetOp::Intersect, None) | (SetOp::Difference, Some(_)) => {}
        }
    }
    if op == SetOp::Union {
        for (ri, r) in dr.tuples().iter().enumerate() {
            if !right_used[ri] {
                out.push_unchecked(r.clone());
            }
        }
    }
    Ok(out)
}

pub fn union(left: &Relation, right: &Relation) -> Result<Relation, PlanError> {
    set_op(left, right, SetOp::Union, true)
}

pub fn intersect(left: &Relation, right: &Relation) -> Result<Relation, PlanError> {
    set_op(left, right, SetOp::Intersect, true)
}

pub fn difference(left: &Relation, right: &Relation) -> Result<Relation, PlanError> {
    set_op(left, right, SetOp::Difference, true)
}

pub(crate) fn union_impl(l: &Relation, r: &Relation, q: bool) -> Result<Relation, PlanError> {
    set_op(l, r, SetOp::Union, q)
}

pub(crate) fn intersect_impl(l: &Relation, r: &Relation, q: bool) -> Result<Relation, PlanError> {
    set_op(l, r, SetOp::Intersect, q)
}

pub(crate) fn difference_impl(l: &Relation, r: &Relation, q: bool) -> Result<Relation, PlanError> {
    set_op(l, r, SetOp::Difference, q)
}

/// Renames output columns; used by plans that need unambiguous names after
/// a join.
pub fn rename(rel: &Relation, names: &[String]) -> Result<Relation, PlanError> {
    if names.len() != rel.schema().arity() {
        return Err(PlanError::SchemaMismatch(format!(
            "rename lists {} names for {} columns",
            names.len(),
            rel.schema().arity()
        )));
    }
    let cols = names
        .iter()
        .zip(rel.schema().columns())
        .map(|(n, c)| Column::new(n.clone(), c.ty))
        .collect();
    let mut out = Relation::new(Schema::new(cols));
    for t in rel.tuples() {
        out.push_unchecked(t.clone());
    }
    Ok(out)
}
