//! Frame labels and the per-segment embedding stream.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};

pub const DEFAULT_HOP_SECONDS: f64 = 0.2;
pub const DEFAULT_WINDOW_SECONDS: f64 = 1.0;

/// Three-way frame class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameLabel {
    /// Non-speech.
    #[serde(rename = "NS")]
    NonSpeech,
    /// Speech from someone other than the target.
    #[serde(rename = "NTSS")]
    NonTargetSpeech,
    /// Target speaker speech.
    #[serde(rename = "TSS")]
    TargetSpeech,
}

impl FrameLabel {
    pub const ALL: [FrameLabel; 3] = [
        FrameLabel::NonSpeech,
        FrameLabel::NonTargetSpeech,
        FrameLabel::TargetSpeech,
    ];

    /// Row/column index in confusion matrices and AP triples.
    pub fn index(self) -> usize {
        match self {
            FrameLabel::NonSpeech => 0,
            FrameLabel::NonTargetSpeech => 1,
            FrameLabel::TargetSpeech => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(FrameLabel::NonSpeech),
            1 => Some(FrameLabel::NonTargetSpeech),
            2 => Some(FrameLabel::TargetSpeech),
            _ => None,
        }
    }

    pub fn to_byte(self) -> u8 {
        self.index() as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameLabel::NonSpeech => "NS",
            FrameLabel::NonTargetSpeech => "NTSS",
            FrameLabel::TargetSpeech => "TSS",
        }
    }
}

impl fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NS" => Ok(FrameLabel::NonSpeech),
            "NTSS" => Ok(FrameLabel::NonTargetSpeech),
            "TSS" => Ok(FrameLabel::TargetSpeech),
            other => Err(Error::InvalidConfig(format!(
                "unknown frame label `{other}`"
            ))),
        }
    }
}

/// One mixed-speech segment: a time-ordered stream of long-window frame
/// embeddings with per-frame speech activity and optional ground truth.
///
/// Each row already represents one long analysis window; the window and hop
/// lengths are carried as metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFrames {
    segment_id: u32,
    embeddings: Vec<Embedding>,
    activity: Vec<f64>,
    labels: Option<Vec<FrameLabel>>,
    hop_seconds: f64,
    window_seconds: f64,
}

impl SegmentFrames {
    pub fn new(
        segment_id: u32,
        embeddings: Vec<Embedding>,
        activity: Vec<f64>,
        labels: Option<Vec<FrameLabel>>,
    ) -> Result<Self> {
        Self::with_timing(
            segment_id,
            embeddings,
            activity,
            labels,
            DEFAULT_HOP_SECONDS,
            DEFAULT_WINDOW_SECONDS,
        )
    }

    pub fn with_timing(
        segment_id: u32,
        embeddings: Vec<Embedding>,
        activity: Vec<f64>,
        labels: Option<Vec<FrameLabel>>,
        hop_seconds: f64,
        window_seconds: f64,
    ) -> Result<Self> {
        let t = embeddings.len();
        if activity.len() != t {
            return Err(Error::LengthMismatch {
                left: t,
                right: activity.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != t {
                return Err(Error::LengthMismatch {
                    left: t,
                    right: l.len(),
                });
            }
        }
        if let Some(first) = embeddings.first() {
            let d = first.dim();
            if let Some(bad) = embeddings.iter().find(|e| e.dim() != d) {
                return Err(Error::dims(d, bad.dim()));
            }
        }
        if let Some(i) = activity
            .iter()
            .position(|a| !a.is_finite() || !(0.0..=1.0).contains(a))
        {
            return Err(Error::InvalidConfig(format!(
                "activity[{i}] = {} outside [0, 1]",
                activity[i]
            )));
        }
        if !(hop_seconds.is_finite() && hop_seconds > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hop_seconds must be positive, got {hop_seconds}"
            )));
        }
        if !(window_seconds.is_finite() && window_seconds >= hop_seconds) {
            return Err(Error::InvalidConfig(format!(
                "window_seconds ({window_seconds}) must be >= hop_seconds ({hop_seconds})"
            )));
        }
        Ok(SegmentFrames {
            segment_id,
            embeddings,
            activity,
            labels,
            hop_seconds,
            window_seconds,
        })
    }

    pub fn segment_id(&self) -> u32 {
        self.segment_id
    }

    pub fn set_segment_id(&mut self, id: u32) {
        self.segment_id = id;
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    /// Embedding dimension, `None` for an empty segment.
    pub fn dim(&self) -> Option<usize> {
        self.embeddings.first().map(Embedding::dim)
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn labels(&self) -> Option<&[FrameLabel]> {
        self.labels.as_deref()
    }

    /// Ground truth, or `NoGroundTruth` when the segment was ingested without it.
    pub fn require_labels(&self) -> Result<&[FrameLabel]> {
        self.labels().ok_or(Error::NoGroundTruth {
            segment_id: self.segment_id,
        })
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop_seconds
    }

    pub fn window_seconds(&self) -> f64 {
        self.window_seconds
    }

    /// Copy with every embedding scaled to unit length (zero rows are kept).
    pub fn normalized(&self) -> SegmentFrames {
        let embeddings = self
            .embeddings
            .iter()
            .map(|e| e.l2_normalize().unwrap_or_else(|_| e.clone()))
            .collect();
        SegmentFrames {
            embeddings,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn label_codes_roundtrip() {
        for l in FrameLabel::ALL {
            assert_eq!(FrameLabel::from_byte(l.to_byte()), Some(l));
            assert_eq!(l.as_str().parse::<FrameLabel>().unwrap(), l);
        }
        assert_eq!(FrameLabel::from_byte(3), None);
        assert!("tss".parse::<FrameLabel>().is_err());
    }

    #[test]
    fn rejects_inconsistent_lengths() {
        let e = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0])];
        assert!(matches!(
            SegmentFrames::new(0, e.clone(), vec![1.0], None),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            SegmentFrames::new(
                0,
                e.clone(),
                vec![1.0, 1.0],
                Some(vec![FrameLabel::NonSpeech])
            ),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(SegmentFrames::new(0, e, vec![1.0, 0.5], None).is_ok());
    }

    #[test]
    fn rejects_mixed_dims_and_bad_activity() {
        let e = vec![emb(&[1.0, 0.0]), emb(&[0.0, 1.0, 0.0])];
        assert!(matches!(
            SegmentFrames::new(0, e, vec![1.0, 1.0], None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(SegmentFrames::new(0, vec![emb(&[1.0])], vec![1.5], None).is_err());
        assert!(SegmentFrames::new(0, vec![emb(&[1.0])], vec![f64::NAN], None).is_err());
    }

    #[test]
    fn rejects_hop_longer_than_window() {
        assert!(SegmentFrames::with_timing(0, vec![], vec![], None, 1.0, 0.5).is_err());
        assert!(SegmentFrames::with_timing(0, vec![], vec![], None, 0.0, 1.0).is_err());
        assert!(SegmentFrames::with_timing(0, vec![], vec![], None, 0.2, 0.2).is_ok());
    }

    #[test]
    fn missing_labels_reported() {
        let s = SegmentFrames::new(7, vec![emb(&[1.0])], vec![1.0], None).unwrap();
        assert!(matches!(
            s.require_labels(),
            Err(Error::NoGroundTruth { segment_id: 7 })
        ));
    }
}
