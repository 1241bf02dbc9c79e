//! Speaker-embedding self-augmentation for personal voice activity detection.
//!
//! A short enrollment embedding is improved with keyframes picked from the
//! mixed-speech stream itself: in each segment the long-window frame most
//! similar to the current reference is selected (if it clears a threshold)
//! and fused into the reference. The crate provides the fusion and
//! long-term update rules, a threshold-based reference detector, frame
//! metrics, a seeded conversation simulator, file formats and a CLI.
//!
//! ```
//! use selfaug::{Embedding, FusionRule, AdaptationState, SelectionConfig};
//!
//! let enroll = Embedding::new(vec![1.0, 0.0]).unwrap();
//! let state = AdaptationState::new(enroll, FusionRule::weighted(0.1).unwrap(), SelectionConfig::default()).unwrap();
//! let next = state.long_term_update(&Embedding::new(vec![0.0, 1.0]).unwrap()).unwrap();
//! assert!((next.current().as_slice()[0] - 0.55).abs() < 1e-12);
//! assert_eq!(next.n(), 2);
//! ```

pub mod augmentation;
pub mod cli;
pub mod detector;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod segment;
pub mod selection;
pub mod simulator;
pub mod stats;

pub use augmentation::{
    fixed_point, fuse_add, fuse_concat, run_adaptation, AdaptationConfig, AdaptationState,
    AdaptationTrace, FusionRule, TraceRecord, DEFAULT_LAMBDA, LAMBDA_SWEEP,
};
pub use detector::{
    decide_frame, decide_segment, score_against_concat, DetectionResult, DetectorConfig,
};
pub use embedding::{cosine_similarity, Embedding, DEFAULT_DIM};
pub use error::{Error, FormatError, FormatErrorKind, Result};
pub use metrics::{
    average_precision, confusion, evaluate, summary, ConfusionMatrix, MetricsReport,
};
pub use segment::{FrameLabel, SegmentFrames};
pub use selection::{score_frames, select_keyframe, SelectionConfig, SelectionResult};
pub use simulator::{
    enrollment_quality, generate_session, EnrollTag, SimulatedSession, SimulationConfig,
};
