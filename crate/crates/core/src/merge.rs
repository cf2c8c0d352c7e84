//! The Merge operator: sweep-line combination of quality trails.
//!
//! Merging walks a sweep line over the union of the input transition
//! timestamps. At each position the output score is the *minimum* of the
//! active input scores (low-quality inputs produce low-quality outputs) and
//! the output statistics combine the active inputs' statistics. Trails
//! participate only from their first transition onward.
//!
//! The output is kept in canonical form: adjacent transitions with identical
//! (score, statistics) are coalesced into the earlier one, which leaves the
//! stepwise quality function unchanged and makes the merge laws
//! (commutativity, associativity) testable as structural equality.

use std::fmt::Write as _;

use crate::error::TrailError;
use crate::trail::{QualityScore, QualityTrail, QualityTransition, TransitionStats};

/// Combines statistics from a non-empty set of transitions: min of mins,
/// max of maxes, sum of sums, sum of counts.
pub fn stats_combine<'a, I>(parts: I) -> Result<TransitionStats, TrailError>
where
    I: IntoIterator<Item = &'a TransitionStats>,
{
    let mut iter = parts.into_iter();
    let first = iter.next().ok_or(TrailError::EmptyStats)?;
    let mut min = first.min();
    let mut max = first.max();
    let mut sum = first.sum();
    let mut count = first.count();
    for s in iter {
        min = min.min(s.min());
        max = max.max(s.max());
        sum += s.sum();
        count += s.count();
    }
    TransitionStats::from_parts(min, max, sum, count)
}

/// A trail in canonical form: no two adjacent transitions share the same
/// (score, statistics) payload.
///
/// Equality between canonical trails ignores triggering-event text; it is
/// the equality witness used for the merge laws.
#[derive(Debug, Clone, Eq)]
pub struct CanonicalTrail(QualityTrail);

impl CanonicalTrail {
    pub fn as_trail(&self) -> &QualityTrail {
        &self.0
    }

    pub fn into_trail(self) -> QualityTrail {
        self.0
    }

    /// Deterministic event-insensitive key: `score@ts:min,max,sum,cnt`
    /// per transition, `;`-joined. Two trails have the same fingerprint iff
    /// they are equal as canonical trails.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        for (i, tr) in self.0.transitions().iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            let s = tr.stats();
            write!(
                out,
                "{}@{}:{},{},{},{}",
                tr.score(),
                tr.timestamp(),
                s.min(),
                s.max(),
                s.sum(),
                s.count()
            )
            .expect("write to String cannot fail");
        }
        out
    }
}

impl PartialEq for CanonicalTrail {
    fn eq(&self, other: &Self) -> bool {
        let a = self.0.transitions();
        let b = other.0.transitions();
        a.len() == b.len()
            && a.iter().zip(b).all(|(x, y)| {
                x.timestamp() == y.timestamp() && x.payload() == y.payload()
            })
    }
}

/// Coalesces adjacent transitions with equal (score, statistics) into the
/// earlier one. The stepwise quality function is unchanged.
pub fn canonicalize(trail: &QualityTrail) -> CanonicalTrail {
    let mut out: Vec<QualityTransition> = Vec::with_capacity(trail.size());
    for tr in trail.transitions() {
        match out.last() {
            Some(prev) if prev.payload() == tr.payload() => {}
            _ => out.push(tr.clone()),
        }
    }
    CanonicalTrail(QualityTrail::from_transitions(out).expect("canonical form preserves validity"))
}

/// True iff the two trails are equal after canonicalization, ignoring
/// triggering-event text.
pub fn trails_equal(a: &QualityTrail, b: &QualityTrail) -> bool {
    canonicalize(a) == canonicalize(b)
}

/// Merges quality trails with the sweep-line algorithm.
///
/// Output transitions carry no triggering event; their score is the minimum
/// over the participating inputs' active scores and their statistics combine
/// the active inputs' statistics. Fails on an empty input list.
pub fn merge<'a, I>(inputs: I) -> Result<CanonicalTrail, TrailError>
where
    I: IntoIterator<Item = &'a QualityTrail>,
{
    let inputs: Vec<&QualityTrail> = inputs.into_iter().collect();
    if inputs.is_empty() {
        return Err(TrailError::EmptyMergeInput);
    }

    // Sweep positions: union of all input transition timestamps.
    let mut breakpoints: Vec<_> = inputs
        .iter()
        .flat_map(|t| t.transitions().iter().map(|tr| tr.timestamp()))
        .collect();
    breakpoints.sort_unstable();
    breakpoints.dedup();

    // One cursor per input pointing at its next transition; `active` holds
    // the transition valid at the current sweep position, if the trail has
    // started participating.
    let mut cursors = vec![0usize; inputs.len()];
    let mut active: Vec<Option<&QualityTransition>> = vec![None; inputs.len()];
    let mut out: Vec<QualityTransition> = Vec::with_capacity(breakpoints.len());

    for t in breakpoints {
        let mut min_score: Option<QualityScore> = None;
        for (i, trail) in inputs.iter().enumerate() {
            let transitions = trail.transitions();
            while cursors[i] < transitions.len() && transitions[cursors[i]].timestamp() <= t {
                active[i] = Some(&transitions[cursors[i]]);
                cursors[i] += 1;
            }
            if let Some(a) = active[i] {
                min_score = Some(match min_score {
                    None => a.score(),
                    Some(m) => m.min(a.score()),
                });
            }
        }
        let score = min_score.expect("every sweep position has at least one participating trail");
        let stats = stats_combine(active.iter().flatten().map(|a| a.stats()))?;
        let transition = QualityTransition::with_stats(score, t, None, stats);
        // Canonicalize on the fly.
        match out.last() {
            Some(prev) if prev.payload() == transition.payload() => {}
            _ => out.push(transition),
        }
    }

    Ok(CanonicalTrail(
        QualityTrail::from_transitions(out).expect("sweep positions strictly increase"),
    ))
}
