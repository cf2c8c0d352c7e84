//! Engine-wide configuration knobs.

use crate::error::TrailError;

/// Tunable limits shared by the trail model, the grouping operator, and the
/// maintenance layer.
///
/// `trail_limit` and `buffer_limit` use `None` for "unlimited". The buffer
/// limit is measured in total buffered transition count, a deterministic
/// proxy for a byte budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Upper bound of the quality score range; scores live in `[1, max_quality]`.
    pub max_quality: u32,
    /// Keep at most this many of the most recent transitions per trail.
    pub trail_limit: Option<u64>,
    /// Maximum total transitions buffered by a grouping operator before
    /// BufferClean and, if that fails, disk spill kick in.
    pub buffer_limit: Option<u64>,
    /// Whether BufferClean runs before resorting to spill.
    pub buffer_clean_enabled: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_quality: 10,
            trail_limit: None,
            buffer_limit: None,
            buffer_clean_enabled: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), TrailError> {
        if self.max_quality < 1 {
            return Err(TrailError::InvalidConfig(
                "max-quality must be at least 1".into(),
            ));
        }
        if self.trail_limit == Some(0) {
            return Err(TrailError::InvalidConfig(
                "trail-limit must be at least 1".into(),
            ));
        }
        if self.buffer_limit == Some(0) {
            return Err(TrailError::InvalidConfig(
                "buffer-limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
