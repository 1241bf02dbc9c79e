//! Keyframe selection: score every long-window frame of a segment against
//! the current reference and keep the single most similar one, provided it
//! reaches the threshold.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, Embedding};
use crate::error::{Error, Result};
use crate::segment::SegmentFrames;

pub const DEFAULT_SELECTION_THRESHOLD: f64 = 0.5;

/// Score assigned to frames whose embedding has zero norm. Never selectable.
pub const UNSCORABLE: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    /// Inclusive lower bound on the keyframe's cosine similarity. Ties in
    /// similarity are resolved in favour of the earliest frame.
    pub threshold: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            threshold: DEFAULT_SELECTION_THRESHOLD,
        }
    }
}

impl SelectionConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        let cfg = SelectionConfig { threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "selection threshold must lie in [-1, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub index: usize,
    pub similarity: f64,
    pub embedding: Embedding,
}

/// Cosine similarity of every frame against `reference`.
///
/// Zero-norm frames score [`UNSCORABLE`].
pub fn score_frames(segment: &SegmentFrames, reference: &Embedding) -> Result<Vec<f64>> {
    if let Some(d) = segment.dim() {
        if d != reference.dim() {
            return Err(Error::dims(reference.dim(), d));
        }
    }
    if reference.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    segment
        .embeddings()
        .iter()
        .map(|frame| match cosine_similarity(frame, reference) {
            Ok(s) => Ok(s),
            Err(Error::ZeroVector) => Ok(UNSCORABLE),
            Err(e) => Err(e),
        })
        .collect()
}

/// Index of the highest score that is `>= threshold`, earliest on ties.
pub(crate) fn best_at_or_above(scores: &[f64], threshold: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s >= threshold && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Pick the keyframe of `segment` with respect to `reference`.
///
/// Returns `NoKeyframe` when no frame reaches the threshold, which callers
/// treat as "leave the reference unchanged for this segment".
pub fn select_keyframe(
    segment: &SegmentFrames,
    reference: &Embedding,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    if segment.is_empty() {
        return Err(Error::EmptySegment);
    }
    let scores = score_frames(segment, reference)?;
    let (index, similarity) =
        best_at_or_above(&scores, cfg.threshold).ok_or(Error::NoKeyframe {
            threshold: cfg.threshold,
        })?;
    Ok(SelectionResult {
        index,
        similarity,
        embedding: segment.embeddings()[index].clone(),
    })
}
