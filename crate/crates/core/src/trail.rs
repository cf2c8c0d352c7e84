//! The quality model: scores, transitions, and trails.
//!
//! A tuple's quality history is a *quality trail*: a chronologically ordered,
//! non-empty sequence of *quality transitions*. Each transition carries a
//! score, the logical time at which it becomes applicable, an optional
//! triggering-event text, and combinable statistics. Transitions follow a
//! stepwise validity pattern: transition `i` is valid over
//! `[ts_i, ts_{i+1})` and the last transition is valid onward.
//!
//! All types here are immutable values; the mutation operations return new
//! trails and reject anything that would break timestamp monotonicity.

use std::fmt;

use crate::error::TrailError;

/// Integer quality level in `[1, max_quality]` (1 is the lowest quality).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityScore(u32);

impl QualityScore {
    pub fn new(value: u32, max_quality: u32) -> Result<Self, TrailError> {
        if value < 1 || value > max_quality {
            return Err(TrailError::ScoreOutOfRange {
                score: value,
                max_quality,
            });
        }
        Ok(QualityScore(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Opaque logical time tick. Totally ordered; no wall-clock semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u64);

impl Timestamp {
    pub fn new(value: u64) -> Self {
        Timestamp(value)
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl From<u64> for Timestamp {
    fn from(value: u64) -> Self {
        Timestamp(value)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Combinable statistics attached to a transition: min/max/sum/count over
/// the scores that were folded into it. The average is derived as
/// `sum / count`. All four are distributive under insertion, which is what
/// makes merging associative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionStats {
    min: QualityScore,
    max: QualityScore,
    sum: u64,
    count: u64,
}

impl TransitionStats {
    /// Fresh statistics for a newly created transition: min = max = sum =
    /// score, count = 1.
    pub fn for_score(score: QualityScore) -> Self {
        TransitionStats {
            min: score,
            max: score,
            sum: u64::from(score.get()),
            count: 1,
        }
    }

    /// Builds statistics from raw parts, validating the invariants
    /// `min <= max`, `count >= 1`, and `min*count <= sum <= max*count`.
    pub fn from_parts(
        min: QualityScore,
        max: QualityScore,
        sum: u64,
        count: u64,
    ) -> Result<Self, TrailError> {
        if min > max {
            return Err(TrailError::InvalidStats(format!(
                "min {} exceeds max {}",
                min, max
            )));
        }
        if count < 1 {
            return Err(TrailError::InvalidStats("count must be at least 1".into()));
        }
        let lo = u64::from(min.get()).saturating_mul(count);
        let hi = u64::from(max.get()).saturating_mul(count);
        if sum < lo || sum > hi {
            return Err(TrailError::InvalidStats(format!(
                "sum {} outside [{}, {}] for min {}, max {}, count {}",
                sum, lo, hi, min, max, count
            )));
        }
        Ok(TransitionStats {
            min,
            max,
            sum,
            count,
        })
    }

    pub fn min(&self) -> QualityScore {
        self.min
    }

    pub fn max(&self) -> QualityScore {
        self.max
    }

    pub fn sum(&self) -> u64 {
        self.sum
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn avg(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }
}

/// One change point in a tuple's quality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityTransition {
    score: QualityScore,
    timestamp: Timestamp,
    triggering_event: Option<String>,
    stats: TransitionStats,
}

impl QualityTransition {
    /// Creates a transition with fresh statistics. An empty event text is
    /// normalized to "no event" (a *minimal* transition).
    pub fn new(score: QualityScore, timestamp: Timestamp, event: Option<&str>) -> Self {
        QualityTransition {
            score,
            timestamp,
            triggering_event: event.filter(|e| !e.is_empty()).map(str::to_owned),
            stats: TransitionStats::for_score(score),
        }
    }

    /// Creates a transition carrying pre-combined statistics (merge outputs,
    /// parsed trails).
    pub fn with_stats(
        score: QualityScore,
        timestamp: Timestamp,
        event: Option<String>,
        stats: TransitionStats,
    ) -> Self {
        QualityTransition {
            score,
            timestamp,
            triggering_event: event.filter(|e| !e.is_empty()),
            stats,
        }
    }

    pub fn score(&self) -> QualityScore {
        self.score
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn triggering_event(&self) -> Option<&str> {
        self.triggering_event.as_deref()
    }

    pub fn stats(&self) -> &TransitionStats {
        self.stats_ref()
    }

    fn stats_ref(&self) -> &TransitionStats {
        &self.stats
    }

    /// Score and statistics, the pair canonical-form equality looks at.
    pub fn payload(&self) -> (QualityScore, TransitionStats) {
        (self.score, self.stats)
    }
}

/// Which end of a trail `trim` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimDirection {
    KeepNewest,
    KeepOldest,
}

/// Chronologically ordered, non-empty sequence of quality transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityTrail {
    transitions: Vec<QualityTransition>,
}

impl QualityTrail {
    /// A trail always starts with its insertion transition.
    pub fn new(initial: QualityTransition) -> Self {
        QualityTrail {
            transitions: vec![initial],
        }
    }

    /// Builds a trail from an already-ordered transition sequence,
    /// validating non-emptiness and strict timestamp monotonicity.
    pub fn from_transitions(transitions: Vec<QualityTransition>) -> Result<Self, TrailError> {
        let Some(first) = transitions.first() else {
            return Err(TrailError::EmptyMergeInput);
        };
        let mut last = first.timestamp();
        for tr in &transitions[1..] {
            if tr.timestamp() <= last {
                return Err(TrailError::NonMonotonicTimestamp {
                    last: last.get(),
                    new: tr.timestamp().get(),
                });
            }
            last = tr.timestamp();
        }
        Ok(QualityTrail { transitions })
    }

    /// Appends a transition. The new timestamp must strictly increase over
    /// the last one, otherwise the modification is rejected.
    pub fn add_transition(&self, transition: QualityTransition) -> Result<Self, TrailError> {
        let last = self.last().timestamp();
        if transition.timestamp() <= last {
            return Err(TrailError::NonMonotonicTimestamp {
                last: last.get(),
                new: transition.timestamp().get(),
            });
        }
        let mut transitions = self.transitions.clone();
        transitions.push(transition);
        Ok(QualityTrail { transitions })
    }

    /// Replaces the transition at `index`. The replacement's timestamp must
    /// stay strictly between the neighbours' timestamps.
    pub fn replace_transition(
        &self,
        index: usize,
        transition: QualityTransition,
    ) -> Result<Self, TrailError> {
        if index >= self.transitions.len() {
            return Err(TrailError::IndexOutOfRange {
                index,
                len: self.transitions.len(),
            });
        }
        if index > 0 {
            let left = self.transitions[index - 1].timestamp();
            if transition.timestamp() <= left {
                return Err(TrailError::NonMonotonicTimestamp {
                    last: left.get(),
                    new: transition.timestamp().get(),
                });
            }
        }
        if index + 1 < self.transitions.len() {
            let right = self.transitions[index + 1].timestamp();
            if transition.timestamp() >= right {
                return Err(TrailError::NonMonotonicTimestamp {
                    last: transition.timestamp().get(),
                    new: right.get(),
                });
            }
        }
        let mut transitions = self.transitions.clone();
        transitions[index] = transition;
        Ok(QualityTrail { transitions })
    }

    /// Keeps at most `k` transitions from the chosen side. `k = 0` is
    /// rejected: it would leave an empty trail.
    pub fn trim(&self, direction: TrimDirection, k: usize) -> Result<Self, TrailError> {
        if k == 0 {
            return Err(TrailError::ZeroTrim);
        }
        if self.transitions.len() <= k {
            return Ok(self.clone());
        }
        let transitions = match direction {
            TrimDirection::KeepNewest => self.transitions[self.transitions.len() - k..].to_vec(),
            TrimDirection::KeepOldest => self.transitions[..k].to_vec(),
        };
        Ok(QualityTrail { transitions })
    }

    pub fn size(&self) -> usize {
        self.transitions.len()
    }

    pub fn transition(&self, index: usize) -> Result<&QualityTransition, TrailError> {
        self.transitions
            .get(index)
            .ok_or(TrailError::IndexOutOfRange {
                index,
                len: self.transitions.len(),
            })
    }

    pub fn transitions(&self) -> &[QualityTransition] {
        &self.transitions
    }

    pub fn first(&self) -> &QualityTransition {
        &self.transitions[0]
    }

    pub fn last(&self) -> &QualityTransition {
        &self.transitions[self.transitions.len() - 1]
    }

    /// Timestamp from which the trail participates in merges.
    pub fn start(&self) -> Timestamp {
        self.first().timestamp()
    }

    /// The transition valid at time `t` under stepwise semantics: the last
    /// transition with timestamp `<= t`. `None` before the first transition.
    pub fn active_at(&self, t: Timestamp) -> Option<&QualityTransition> {
        let idx = self.transitions.partition_point(|tr| tr.timestamp() <= t);
        if idx == 0 {
            None
        } else {
            Some(&self.transitions[idx - 1])
        }
    }

    pub fn quality_at(&self, t: Timestamp) -> Option<QualityScore> {
        self.active_at(t).map(QualityTransition::score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(v: u32) -> QualityScore {
        QualityScore::new(v, 10).unwrap()
    }

    fn tr(s: u32, ts: u64) -> QualityTransition {
        QualityTransition::new(score(s), Timestamp::new(ts), None)
    }

    #[test]
    fn make_transition_sets_fresh_stats() {
        let t = QualityTransition::new(
            score(4),
            Timestamp::new(1005),
            Some("updating a wrong value"),
        );
        assert_eq!(t.stats().min().get(), 4);
        assert_eq!(t.stats().max().get(), 4);
        assert_eq!(t.stats().sum(), 4);
        assert_eq!(t.stats().count(), 1);
        assert_eq!(t.triggering_event(), Some("updating a wrong value"));

        let t = QualityTransition::new(score(1), Timestamp::new(0), None);
        assert_eq!(
            *t.stats(),
            TransitionStats::from_parts(score(1), score(1), 1, 1).unwrap()
        );
    }

    #[test]
    fn score_out_of_range_is_rejected() {
        assert_eq!(
            QualityScore::new(11, 10),
            Err(TrailError::ScoreOutOfRange {
                score: 11,
                max_quality: 10
            })
        );
        assert!(QualityScore::new(0, 10).is_err());
        assert!(QualityScore::new(10, 10).is_ok());
    }

    #[test]
    fn empty_event_normalized_to_none() {
        let t = QualityTransition::new(score(3), Timestamp::new(7), Some(""));
        assert_eq!(t.triggering_event(), None);
    }

    #[test]
    fn new_trail_has_one_transition() {
        let trail = QualityTrail::new(tr(5, 0));
        assert_eq!(trail.size(), 1);
        assert_eq!(
            trail.quality_at(Timestamp::new(0)),
            Some(score(5)),
            "stepwise definition at the initial timestamp"
        );
    }

    #[test]
    fn add_transition_appends_and_rejects_non_monotone() {
        let trail = QualityTrail::new(tr(5, 0));
        let trail = trail.add_transition(tr(3, 5)).unwrap();
        assert_eq!(trail.size(), 2);
        assert_eq!(trail.last().score(), score(3));

        let err = trail.add_transition(tr(4, 5)).unwrap_err();
        assert_eq!(err, TrailError::NonMonotonicTimestamp { last: 5, new: 5 });

        let trail = QualityTrail::new(tr(5, 0))
            .add_transition(tr(2, 3))
            .unwrap()
            .add_transition(tr(6, 7))
            .unwrap();
        assert_eq!(
            trail
                .transitions()
                .iter()
                .map(|t| (t.score().get(), t.timestamp().get()))
                .collect::<Vec<_>>(),
            vec![(5, 0), (2, 3), (6, 7)]
        );
    }

    #[test]
    fn replace_transition_respects_neighbours() {
        let trail = QualityTrail::from_transitions(vec![tr(5, 0), tr(3, 5), tr(2, 9)]).unwrap();

        let replaced = trail.replace_transition(1, tr(4, 6)).unwrap();
        assert_eq!(
            replaced
                .transitions()
                .iter()
                .map(|t| (t.score().get(), t.timestamp().get()))
                .collect::<Vec<_>>(),
            vec![(5, 0), (4, 6), (2, 9)]
        );

        // Equal to the right neighbour's timestamp: rejected.
        assert!(trail.replace_transition(1, tr(4, 9)).is_err());
        // Out of range.
        assert_eq!(
            trail.replace_transition(5, tr(4, 6)).unwrap_err(),
            TrailError::IndexOutOfRange { index: 5, len: 3 }
        );
    }

    #[test]
    fn trim_keeps_requested_side() {
        let trail = QualityTrail::from_transitions(
            (0..7).map(|i| tr(((i % 10) + 1) as u32, i * 10)).collect(),
        )
        .unwrap();

        let trimmed = trail.trim(TrimDirection::KeepNewest, 5).unwrap();
        assert_eq!(trimmed.size(), 5);
        assert_eq!(trimmed.transitions(), &trail.transitions()[2..]);

        let short = QualityTrail::from_transitions(vec![tr(1, 0), tr(2, 1), tr(3, 2)]).unwrap();
        assert_eq!(short.trim(TrimDirection::KeepNewest, 10).unwrap(), short);

        let one = trail.trim(TrimDirection::KeepNewest, 1).unwrap();
        assert_eq!(one.size(), 1);
        assert_eq!(one.first(), trail.last());

        let oldest = trail.trim(TrimDirection::KeepOldest, 2).unwrap();
        assert_eq!(oldest.transitions(), &trail.transitions()[..2]);

        assert_eq!(
            trail.trim(TrimDirection::KeepNewest, 0).unwrap_err(),
            TrailError::ZeroTrim
        );
    }

    #[test]
    fn accessors() {
        let trail = QualityTrail::from_transitions(vec![tr(5, 0), tr(3, 5)]).unwrap();
        assert_eq!(trail.size(), 2);
        assert_eq!(trail.transition(0).unwrap(), &tr(5, 0));
        assert!(trail.transition(2).is_err());
        assert_eq!(trail.transitions().len(), 2);
    }

    #[test]
    fn active_transition_is_stepwise() {
        let trail = QualityTrail::from_transitions(vec![tr(5, 0), tr(3, 5)]).unwrap();
        assert_eq!(trail.active_at(Timestamp::new(4)), Some(&tr(5, 0)));
        assert_eq!(
            trail.active_at(Timestamp::new(5)),
            Some(&tr(3, 5)),
            "interval is left-closed"
        );

        let late = QualityTrail::new(tr(5, 2));
        assert_eq!(late.active_at(Timestamp::new(1)), None);
    }

    #[test]
    fn quality_at_follows_last_transition_onward() {
        let trail =
            QualityTrail::from_transitions(vec![tr(5, 0), tr(3, 5), tr(2, 10)]).unwrap();
        assert_eq!(trail.quality_at(Timestamp::new(7)), Some(score(3)));
        assert_eq!(trail.quality_at(Timestamp::new(10)), Some(score(2)));
        assert_eq!(
            trail.quality_at(Timestamp::new(100)),
            Some(score(2)),
            "last transition is valid onward"
        );
    }

    #[test]
    fn stats_invariants_enforced() {
        assert!(TransitionStats::from_parts(score(3), score(2), 5, 2).is_err());
        assert!(TransitionStats::from_parts(score(2), score(3), 5, 0).is_err());
        assert!(TransitionStats::from_parts(score(2), score(3), 7, 2).is_err());
        assert!(TransitionStats::from_parts(score(2), score(3), 5, 2).is_ok());
        let s = TransitionStats::from_parts(score(2), score(3), 5, 2).unwrap();
        assert_eq!(s.avg(), 2.5);
    }
}
