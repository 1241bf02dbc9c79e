//! Similarity-threshold frame classifier.
//!
//! Stands in for a trained personal-VAD head: a frame is non-speech when its
//! activity falls below the VAD gate, target speech when its similarity to
//! the reference clears the speaker threshold, and non-target speech
//! otherwise. The detector has no parameters beyond the two thresholds, so
//! any change in its output is caused by the reference embedding alone.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, Embedding};
use crate::error::{Error, Result};
use crate::segment::{FrameLabel, SegmentFrames};

pub const DEFAULT_VAD_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SPEAKER_THRESHOLD: f64 = 0.5;

/// Score reported for frames whose similarity cannot be computed.
pub const UNCOMPUTABLE_SCORE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub vad_threshold: f64,
    pub speaker_threshold: f64,
    /// Score a `2D` reference against `D` frames by averaging the cosine to
    /// each half.
    pub concat_scoring: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            vad_threshold: DEFAULT_VAD_THRESHOLD,
            speaker_threshold: DEFAULT_SPEAKER_THRESHOLD,
            concat_scoring: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.vad_threshold.is_finite() || !(0.0..=1.0).contains(&self.vad_threshold) {
            return Err(Error::InvalidConfig(format!(
                "vad_threshold must lie in [0, 1], got {}",
                self.vad_threshold
            )));
        }
        if !self.speaker_threshold.is_finite() || !(-1.0..=1.0).contains(&self.speaker_threshold) {
            return Err(Error::InvalidConfig(format!(
                "speaker_threshold must lie in [-1, 1], got {}",
                self.speaker_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub decisions: Vec<FrameLabel>,
    /// Similarity to the reference per frame (the TSS score).
    pub scores: Vec<f64>,
}

impl DetectionResult {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }
}

/// `0.5 * (cos(frame, first half) + cos(frame, second half))`.
///
/// A zero-norm half contributes 0.
pub fn score_against_concat(frame: &Embedding, reference: &Embedding) -> Result<f64> {
    if reference.dim() != 2 * frame.dim() {
        return Err(Error::dims(2 * frame.dim(), reference.dim()));
    }
    if frame.is_zero() {
        return Err(Error::ZeroVector);
    }
    let (a, b) = reference.halves().expect("even dimension checked above");
    let half = |h: &Embedding| match cosine_similarity(frame, h) {
        Ok(c) => Ok(c),
        Err(Error::ZeroVector) => Ok(0.0),
        Err(e) => Err(e),
    };
    Ok(0.5 * (half(&a)? + half(&b)?))
}

fn similarity(frame: &Embedding, reference: &Embedding, cfg: &DetectorConfig) -> Result<f64> {
    if reference.is_zero() {
        return Err(Error::ZeroVector);
    }
    let raw = if cfg.concat_scoring && reference.dim() == 2 * frame.dim() {
        score_against_concat(frame, reference)
    } else {
        cosine_similarity(frame, reference)
    };
    match raw {
        Err(Error::ZeroVector) => Ok(UNCOMPUTABLE_SCORE),
        other => other,
    }
}

/// Classify one frame. The score is always the similarity to the reference
/// (or [`UNCOMPUTABLE_SCORE`] for a zero-norm frame), even when the activity
/// gate forces `NS`, so every frame can be ranked.
pub fn decide_frame(
    embedding: &Embedding,
    activity: f64,
    reference: &Embedding,
    cfg: &DetectorConfig,
) -> Result<(FrameLabel, f64)> {
    let score = similarity(embedding, reference, cfg)?;
    let label = if activity < cfg.vad_threshold {
        FrameLabel::NonSpeech
    } else if score >= cfg.speaker_threshold {
        FrameLabel::TargetSpeech
    } else {
        FrameLabel::NonTargetSpeech
    };
    Ok((label, score))
}

pub fn decide_segment(
    segment: &SegmentFrames,
    reference: &Embedding,
    cfg: &DetectorConfig,
) -> Result<DetectionResult> {
    if segment.is_empty() {
        return Err(Error::EmptySegment);
    }
    let mut decisions = Vec::with_capacity(segment.len());
    let mut scores = Vec::with_capacity(segment.len());
    for (e, &a) in segment.embeddings().iter().zip(segment.activity()) {
        let (label, score) = decide_frame(e, a, reference, cfg)?;
        decisions.push(label);
        scores.push(score);
    }
    Ok(DetectionResult { decisions, scores })
}
