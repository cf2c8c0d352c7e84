//! An embeddable in-memory relational query engine where every tuple carries
//! a time-ordered quality trail.
//!
//! Relational operators propagate and derive output trails automatically:
//! selection and projection pass trails through untouched, joins and set
//! operators combine parent trails with the sweep-line [`merge::merge`]
//! operator, and grouping supports both black-box (every group member
//! contributes) and open-box (only tuples that influenced the aggregate
//! contribute) quality derivation, with bounded buffering and disk spill.
//!
//! The crate is organized in layers:
//!
//! - [`trail`] / [`text`]: the quality model and its wire format
//! - [`merge`]: the sweep-line Merge operator and canonical trails
//! - [`value`] / [`relation`] / [`predicate`]: quality-annotated relations
//! - [`algebra`]: the extended relational operators
//! - [`aggregate`]: grouping with the contribution-status protocol
//! - [`plan`]: JSON logical plans and the pull-based executor
//! - [`store`]: catalog, CSV ingestion, storage schemes, quality-event replay

pub mod aggregate;
pub mod algebra;
pub mod config;
pub mod error;
pub mod merge;
pub mod plan;
pub mod predicate;
pub mod relation;
pub mod store;
pub mod text;
pub mod trail;
pub mod value;

pub use config::EngineConfig;
pub use error::{AggregateError, ParseError, PlanError, StoreError, TrailError};
pub use merge::{canonicalize, merge, stats_combine, trails_equal, CanonicalTrail};
pub use relation::{Column, QTuple, Relation, Schema};
pub use text::{parse_trail, serialize_trail};
pub use trail::{
    QualityScore, QualityTrail, QualityTransition, Timestamp, TransitionStats, TrimDirection,
};
