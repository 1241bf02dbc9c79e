//! Evaluation harness shared by the CLI and the acceptance suite.
//!
//! Segment `k` is always scored with the reference in effect before `k` was
//! processed: the enrollment for the first segment, the reference produced
//! by segment `k - 1` afterwards.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::augmentation::{
    fuse_add, run_adaptation, AdaptationConfig, AdaptationTrace, FusionRule,
};
use crate::detector::{decide_segment, DetectionResult, DetectorConfig};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport};
use crate::segment::{FrameLabel, SegmentFrames};
use crate::selection::{select_keyframe, SelectionConfig};
use crate::simulator::{EnrollTag, SimulatedSession};

pub fn detect_and_score(
    segment: &SegmentFrames,
    reference: &Embedding,
    detector: &DetectorConfig,
) -> Result<(DetectionResult, MetricsReport)> {
    let labels = segment.require_labels()?;
    let det = decide_segment(segment, reference, detector)?;
    let report = evaluate(labels, segment.activity(), &det)?;
    Ok((det, report))
}

pub fn evaluate_reference(
    segment: &SegmentFrames,
    reference: &Embedding,
    detector: &DetectorConfig,
) -> Result<MetricsReport> {
    detect_and_score(segment, reference, detector).map(|(_, r)| r)
}

/// One report per segment, each scored with the reference in effect
/// before that segment.
pub fn evaluate_trace(
    segments: &[SegmentFrames],
    trace: &AdaptationTrace,
    detector: &DetectorConfig,
) -> Result<Vec<MetricsReport>> {
    check_alignment(segments, trace)?;
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| evaluate_reference(seg, trace.reference_before(k), detector))
        .collect()
}

pub(crate) fn check_alignment(segments: &[SegmentFrames], trace: &AdaptationTrace) -> Result<()> {
    if segments.len() != trace.records.len() {
        return Err(Error::LengthMismatch {
            left: segments.len(),
            right: trace.records.len(),
        });
    }
    if let Some((s, r)) = segments
        .iter()
        .zip(&trace.records)
        .find(|(s, r)| s.segment_id() != r.segment_id)
    {
        return Err(Error::InvalidConfig(format!(
            "trace record for segment {} does not match segment {}",
            r.segment_id,
            s.segment_id()
        )));
    }
    Ok(())
}

/// Iteration counter of the reference used for segment `position`.
pub fn reference_n(trace: &AdaptationTrace, position: usize) -> u32 {
    match position {
        0 => 1,
        p => trace.records[p - 1].n,
    }
}

/// Metrics over the concatenation of several segments' frames.
pub fn pooled_report(
    segments: &[SegmentFrames],
    detections: &[DetectionResult],
) -> Result<MetricsReport> {
    let mut labels: Vec<FrameLabel> = Vec::new();
    let mut activity = Vec::new();
    let mut all = DetectionResult {
        decisions: Vec::new(),
        scores: Vec::new(),
    };
    for (seg, det) in segments.iter().zip(detections) {
        labels.extend_from_slice(seg.require_labels()?);
        activity.extend_from_slice(seg.activity());
        all.decisions.extend_from_slice(&det.decisions);
        all.scores.extend_from_slice(&det.scores);
    }
    evaluate(&labels, &activity, &all)
}

/// Run the rule over the session's segments and score every segment.
pub fn run_condition(
    segments: &[SegmentFrames],
    enroll: &Embedding,
    config: &AdaptationConfig,
    detector: &DetectorConfig,
) -> Result<(AdaptationTrace, Vec<MetricsReport>)> {
    let trace = run_adaptation(segments, enroll, config)?;
    let reports = evaluate_trace(segments, &trace, detector)?;
    Ok((trace, reports))
}

/// Segment-one comparison of three references: the enrollment alone, the
/// selected keyframe alone, and their sum. Without a keyframe both
/// augmented variants fall back to the enrollment.
pub fn first_segment_fusions(
    segment: &SegmentFrames,
    enroll: &Embedding,
    selection: &SelectionConfig,
    detector: &DetectorConfig,
) -> Result<[MetricsReport; 3]> {
    let (selected, added) = match select_keyframe(segment, enroll, selection) {
        Ok(s) => {
            let added = fuse_add(enroll, &s.embedding)?;
            (s.embedding, added)
        }
        Err(Error::NoKeyframe { .. }) => (enroll.clone(), enroll.clone()),
        Err(e) => return Err(e),
    };
    Ok([
        evaluate_reference(segment, enroll, detector)?,
        evaluate_reference(segment, &selected, detector)?,
        evaluate_reference(segment, &added, detector)?,
    ])
}

/// One long-form result row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: Option<u64>,
    pub rule: String,
    pub lambda: Option<f64>,
    pub tag: EnrollTag,
    pub segment: u32,
    /// Iteration counter of the reference used for this segment.
    pub reference_n: u32,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub macro_recall: f64,
    pub macro_precision: f64,
    pub macro_f1: f64,
    pub ap_ns: Option<f64>,
    pub ap_ntss: Option<f64>,
    pub ap_tss: Option<f64>,
}

impl SweepRow {
    pub fn new(
        seed: Option<u64>,
        rule: &str,
        lambda: Option<f64>,
        tag: EnrollTag,
        segment: u32,
        reference_n: u32,
        m: &MetricsReport,
    ) -> Self {
        SweepRow {
            seed,
            rule: rule.to_string(),
            lambda,
            tag,
            segment,
            reference_n,
            accuracy: m.accuracy,
            recall: m.recall,
            precision: m.precision,
            f1: m.f1,
            macro_recall: m.macro_recall,
            macro_precision: m.macro_precision,
            macro_f1: m.macro_f1,
            ap_ns: m.per_class_ap[0],
            ap_ntss: m.per_class_ap[1],
            ap_tss: m.per_class_ap[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub rules: Vec<String>,
    pub lambdas: Vec<f64>,
    pub tags: Vec<EnrollTag>,
    pub selection: SelectionConfig,
    pub detector: DetectorConfig,
    pub normalize_inputs: bool,
    pub renormalize: bool,
}

/// Rows for one session, ordered by tag, rule, lambda, segment.
pub fn sweep_session(
    seed: Option<u64>,
    segments: &[SegmentFrames],
    enrollments: &BTreeMap<EnrollTag, Embedding>,
    plan: &SweepPlan,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &tag in &plan.tags {
        let enroll = enrollments
            .get(&tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        for rule_name in &plan.rules {
            for &lambda in &plan.lambdas {
                let config = AdaptationConfig {
                    rule: FusionRule::parse(rule_name, lambda)?,
                    selection: plan.selection,
                    normalize_inputs: plan.normalize_inputs,
                    renormalize: plan.renormalize,
                };
                let (trace, reports) = run_condition(segments, enroll, &config, &plan.detector)?;
                for (k, (seg, m)) in segments.iter().zip(&reports).enumerate() {
                    rows.push(SweepRow::new(
                        seed,
                        rule_name,
                        Some(lambda),
                        tag,
                        seg.segment_id(),
                        reference_n(&trace, k),
                        m,
                    ));
                }
            }
        }
    }
    Ok(rows)
}

pub fn sweep_simulated(session: &SimulatedSession, plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    sweep_session(
        Some(session.config.seed),
        &session.segments,
        &session.enrollment,
        plan,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_session, EnrollSigmas, SimulationConfig};

    fn noiseless() -> SimulatedSession {
        let cfg = SimulationConfig {
            dim: 64,
            num_segments: 4,
            frames_per_segment: 80,
            frame_noise_sigma: 0.0,
            drift_per_segment: 0.0,
            enroll_noise_sigma: EnrollSigmas::uniform(0.0),
            window_seconds: 0.2,
            speaker_common_fraction: (0.0, 0.2),
            seed: 11,
            ..Default::default()
        };
        generate_session(&cfg).unwrap()
    }

    #[test]
    fn perfect_enrollment_gives_perfect_f1() {
        let s = noiseless();
        let enroll = s.enrollment(EnrollTag::Full).unwrap();
        let cfg = AdaptationConfig::new(
            FusionRule::weighted(0.1).unwrap(),
            SelectionConfig::default(),
        );
        let (_, reports) =
            run_condition(&s.segments, enroll, &cfg, &DetectorConfig::default()).unwrap();
        for r in reports {
            assert_eq!(r.f1, 1.0);
            assert_eq!(r.accuracy, 1.0);
        }
    }

    #[test]
    fn missing_labels_are_reported() {
        let seg = SegmentFrames::new(3, vec![Embedding::new(vec![1.0]).unwrap()], vec![1.0], None)
            .unwrap();
        let err = evaluate_reference(
            &seg,
            &Embedding::new(vec![1.0]).unwrap(),
            &DetectorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoGroundTruth { segment_id: 3 }));
    }

    #[test]
    fn sweep_cardinality() {
        let s = noiseless();
        let plan = SweepPlan {
            rules: vec!["weighted".into(), "naive-add".into()],
            lambdas: crate::augmentation::LAMBDA_SWEEP.to_vec(),
            tags: vec![EnrollTag::HalfSecond, EnrollTag::Full],
            selection: SelectionConfig::default(),
            detector: DetectorConfig::default(),
            normalize_inputs: false,
            renormalize: false,
        };
        let rows = sweep_simulated(&s, &plan).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 5 * 4);
        assert!(rows
            .iter()
            .take(20)
            .all(|r| r.tag == EnrollTag::HalfSecond && r.rule == "weighted"));
        assert_eq!(rows[0].reference_n, 1);
    }

    #[test]
    fn trace_alignment_is_checked() {
        let s = noiseless();
        let enroll = s.enrollment(EnrollTag::Full).unwrap();
        let cfg = AdaptationConfig::new(FusionRule::None, SelectionConfig::default());
        let trace = run_adaptation(&s.segments, enroll, &cfg).unwrap();
        assert!(evaluate_trace(&s.segments[..2], &trace, &DetectorConfig::default()).is_err());
    }
}
