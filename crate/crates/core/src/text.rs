//! Trail wire format.
//!
//! Transitions are joined by `;`. Each transition is four `|`-separated
//! fields in fixed order: decimal score, decimal timestamp, percent-encoded
//! event text (empty allowed), and statistics as
//! `min:<int>,max:<int>,sum:<int>,cnt:<int>`.
//!
//! ```text
//! 4|1005|updating%20a%20wrong%20value|min:4,max:4,sum:4,cnt:1;3|1010||min:3,max:3,sum:3,cnt:1
//! ```
//!
//! The event text percent-encodes `%`, `|`, `;`, `,` and every byte outside
//! the visible ASCII range `0x21..=0x7E` (space included), so splitting on
//! the delimiters is always safe.

use std::fmt::Write as _;

use crate::error::ParseError;
use crate::trail::{QualityScore, QualityTrail, QualityTransition, Timestamp, TransitionStats};

fn byte_needs_encoding(b: u8) -> bool {
    !(0x21..=0x7e).contains(&b) || matches!(b, b'%' | b'|' | b';' | b',')
}

fn encode_event(event: &str) -> String {
    let mut out = String::with_capacity(event.len());
    for &b in event.as_bytes() {
        if byte_needs_encoding(b) {
            write!(out, "%{:02X}", b).expect("write to String cannot fail");
        } else {
            out.push(b as char);
        }
    }
    out
}

fn decode_event(field: &str, offset: usize) -> Result<Option<String>, ParseError> {
    if field.is_empty() {
        return Ok(None);
    }
    let bytes = field.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .ok_or_else(|| ParseError::new(offset + i, "truncated percent escape"))?;
            let hi = hex_digit(hex[0]).ok_or_else(|| {
                ParseError::new(offset + i, "invalid hex digit in percent escape")
            })?;
            let lo = hex_digit(hex[1]).ok_or_else(|| {
                ParseError::new(offset + i, "invalid hex digit in percent escape")
            })?;
            out.push(hi * 16 + lo);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    let text = String::from_utf8(out)
        .map_err(|_| ParseError::new(offset, "event text is not valid UTF-8"))?;
    Ok(Some(text))
}

fn hex_digit(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Serializes a trail to the wire format. `parse_trail` inverts this exactly.
pub fn serialize_trail(trail: &QualityTrail) -> String {
    let mut out = String::new();
    for (i, tr) in trail.transitions().iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let stats = tr.stats();
        write!(
            out,
            "{}|{}|{}|min:{},max:{},sum:{},cnt:{}",
            tr.score(),
            tr.timestamp(),
            encode_event(tr.triggering_event().unwrap_or("")),
            stats.min(),
            stats.max(),
            stats.sum(),
            stats.count(),
        )
        .expect("write to String cannot fail");
    }
    out
}

/// Parses trail text, validating scores against `max_quality`, timestamp
/// monotonicity, and statistics invariants. Errors carry the byte position
/// of the offending field.
pub fn parse_trail(text: &str, max_quality: u32) -> Result<QualityTrail, ParseError> {
    if text.is_empty() {
        return Err(ParseError::new(0, "empty trail text"));
    }
    let mut transitions = Vec::new();
    let mut offset = 0;
    for segment in text.split(';') {
        transitions.push(parse_transition(segment, offset, max_quality)?);
        offset += segment.len() + 1;
    }
    QualityTrail::from_transitions(transitions)
        .map_err(|e| ParseError::new(0, format!("invalid trail: {e}")))
}

fn parse_transition(
    segment: &str,
    offset: usize,
    max_quality: u32,
) -> Result<QualityTransition, ParseError> {
    let fields: Vec<&str> = segment.split('|').collect();
    if fields.len() != 4 {
        return Err(ParseError::new(
            offset,
            format!("transition has {} fields, expected 4", fields.len()),
        ));
    }
    let score_off = offset;
    let ts_off = score_off + fields[0].len() + 1;
    let event_off = ts_off + fields[1].len() + 1;
    let stats_off = event_off + fields[2].len() + 1;

    let raw_score: u32 = fields[0]
        .parse()
        .map_err(|_| ParseError::new(score_off, "invalid score"))?;
    let score = QualityScore::new(raw_score, max_quality)
        .map_err(|e| ParseError::new(score_off, e.to_string()))?;
    let ts: u64 = fields[1]
        .parse()
        .map_err(|_| ParseError::new(ts_off, "invalid timestamp"))?;
    let event = decode_event(fields[2], event_off)?;
    let stats = parse_stats(fields[3], stats_off, max_quality)?;

    Ok(QualityTransition::with_stats(
        score,
        Timestamp::new(ts),
        event,
        stats,
    ))
}

fn parse_stats(
    field: &str,
    offset: usize,
    max_quality: u32,
) -> Result<TransitionStats, ParseError> {
    let parts: Vec<&str> = field.split(',').collect();
    if parts.len() != 4 {
        return Err(ParseError::new(
            offset,
            format!("stats have {} entries, expected 4", parts.len()),
        ));
    }
    let mut values = [0u64; 4];
    let mut part_off = offset;
    for (i, (part, key)) in parts.iter().zip(["min:", "max:", "sum:", "cnt:"]).enumerate() {
        let Some(rest) = part.strip_prefix(key) else {
            return Err(ParseError::new(
                part_off,
                format!("expected stats field '{}'", &key[..3]),
            ));
        };
        values[i] = rest
            .parse()
            .map_err(|_| ParseError::new(part_off + key.len(), "invalid stats value"))?;
        part_off += part.len() + 1;
    }
    let min = u32::try_from(values[0])
        .ok()
        .and_then(|v| QualityScore::new(v, max_quality).ok())
        .ok_or_else(|| ParseError::new(offset, "stats min out of score range"))?;
    let max = u32::try_from(values[1])
        .ok()
        .and_then(|v| QualityScore::new(v, max_quality).ok())
        .ok_or_else(|| ParseError::new(offset, "stats max out of score range"))?;
    TransitionStats::from_parts(min, max, values[2], values[3])
        .map_err(|e| ParseError::new(offset, e.to_string()))
}
