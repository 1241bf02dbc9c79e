//! Reference-embedding fusion and long-term adaptation across segments.
//!
//! The long-term rule averages the previous reference with the new keyframe
//! and pulls the result back towards the original enrollment:
//!
//! ```text
//! avg     = 0.5 * (current + selected)
//! current = lambda * enroll + (1 - lambda) * avg
//! ```
//!
//! With a stationary keyframe `s` this is an affine contraction with factor
//! `(1 - lambda) / 2` and unique fixed point `(2 lambda e + (1 - lambda) s) / (1 + lambda)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::segment::SegmentFrames;
use crate::selection::{best_at_or_above, score_frames, SelectionConfig, UNSCORABLE};

pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Residual weights swept in the ablation.
pub const LAMBDA_SWEEP: [f64; 5] = [0.05, 0.1, 0.2, 0.3, 0.4];

/// How the reference is updated from a segment's keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FusionRule {
    /// Reference stays the enrollment embedding.
    None,
    /// `[enroll; selected]`, applied once. Only valid for single-segment runs.
    #[serde(rename = "cat")]
    Concat,
    /// `enroll + selected`, applied once with the first keyframe found; the
    /// reference is frozen afterwards.
    Add,
    /// `current + selected` on every segment, with no anchoring.
    NaiveAdd,
    /// Averaging update with a residual pull towards the enrollment.
    #[serde(rename = "weighted")]
    WeightedResidual { lambda: f64 },
}

impl FusionRule {
    pub fn weighted(lambda: f64) -> Result<Self> {
        let r = FusionRule::WeightedResidual { lambda };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if let FusionRule::WeightedResidual { lambda } = *self {
            if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidConfig(format!(
                    "lambda must lie in [0, 1], got {lambda}"
                )));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionRule::None => "none",
            FusionRule::Concat => "cat",
            FusionRule::Add => "add",
            FusionRule::NaiveAdd => "naive-add",
            FusionRule::WeightedResidual { .. } => "weighted",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            FusionRule::WeightedResidual { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Parse a CLI rule name; `lambda` is only consulted for `weighted`.
    pub fn parse(name: &str, lambda: f64) -> Result<Self> {
        match name {
            "none" => Ok(FusionRule::None),
            "cat" | "concat" => Ok(FusionRule::Concat),
            "add" => Ok(FusionRule::Add),
            "naive-add" => Ok(FusionRule::NaiveAdd),
            "weighted" => FusionRule::weighted(lambda),
            other => Err(Error::InvalidConfig(format!(
                "unknown rule `{other}` (expected none|cat|add|weighted|naive-add)"
            ))),
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lambda() {
            Some(l) => write!(f, "weighted(lambda={l})"),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionRule::parse(s, DEFAULT_LAMBDA)
    }
}

/// `[enroll; selected]`.
pub fn fuse_concat(enroll: &Embedding, selected: &Embedding) -> Result<Embedding> {
    if enroll.dim() != selected.dim() {
        return Err(Error::dims(enroll.dim(), selected.dim()));
    }
    Ok(enroll.concat(selected))
}

/// `enroll + selected`.
pub fn fuse_add(enroll: &Embedding, selected: &Embedding) -> Result<Embedding> {
    enroll.add(selected)
}

/// Limit of the weighted update when every segment yields the same keyframe.
///
/// Solves `x = lambda e + (1 - lambda) (x + s) / 2`; requires `lambda < 1`
/// only for uniqueness of the derivation, and `lambda = 1` gives `e` anyway.
pub fn fixed_point(enroll: &Embedding, selected: &Embedding, lambda: f64) -> Result<Embedding> {
    if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!(
            "fixed point requires lambda in [0, 1), got {lambda}"
        )));
    }
    if enroll.dim() != selected.dim() {
        return Err(Error::dims(enroll.dim(), selected.dim()));
    }
    let denom = 1.0 + lambda;
    Embedding::new(
        enroll
            .as_slice()
            .iter()
            .zip(selected.as_slice())
            .map(|(e, s)| (2.0 * lambda * e + (1.0 - lambda) * s) / denom)
            .collect(),
    )
}

/// The evolving reference of one adaptation session.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState {
    enroll: Embedding,
    current: Embedding,
    n: u32,
    rule: FusionRule,
    selection: SelectionConfig,
    renormalize: bool,
}

impl AdaptationState {
    pub fn new(enroll: Embedding, rule: FusionRule, selection: SelectionConfig) -> Result<Self> {
        rule.validate()?;
        selection.validate()?;
        Ok(AdaptationState {
            current: enroll.clone(),
            enroll,
            n: 1,
            rule,
            selection,
            renormalize: false,
        })
    }

    /// Rescale the reference to unit length after every update.
    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn enroll(&self) -> &Embedding {
        &self.enroll
    }

    /// Reference currently in effect (`E_augmented_{n-1}`, the enrollment when `n == 1`).
    pub fn current(&self) -> &Embedding {
        &self.current
    }

    /// Iteration counter, starting at 1 and incremented once per applied update.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rule(&self) -> FusionRule {
        self.rule
    }

    pub fn selection(&self) -> &SelectionConfig {
        &self.selection
    }

    fn advanced(&self, current: Embedding) -> Result<Self> {
        let current = if self.renormalize {
            current.l2_normalize()?
        } else {
            current
        };
        Ok(AdaptationState {
            current,
            n: self.n + 1,
            ..self.clone()
        })
    }

    fn check_dim(&self, selected: &Embedding) -> Result<()> {
        if selected.dim() != self.enroll.dim() {
            return Err(Error::dims(self.enroll.dim(), selected.dim()));
        }
        if self.current.dim() != self.enroll.dim() {
            return Err(Error::dims(self.enroll.dim(), self.current.dim()));
        }
        Ok(())
    }

    /// Weighted residual update.
    pub fn long_term_update(&self, selected: &Embedding) -> Result<Self> {
        let FusionRule::WeightedResidual { lambda } = self.rule else {
            return Err(Error::WrongRule(format!(
                "long-term update needs the weighted rule, state uses `{}`",
                self.rule
            )));
        };
        self.check_dim(selected)?;
        let values = self
            .enroll
            .as_slice()
            .iter()
            .zip(self.current.as_slice())
            .zip(selected.as_slice())
            .map(|((e, c), s)| lambda * e + (1.0 - lambda) * (0.5 * (c + s)))
            .collect();
        self.advanced(Embedding::new(values)?)
    }

    /// Unanchored additive update: `current + selected`.
    pub fn naive_iterative_update(&self, selected: &Embedding) -> Result<Self> {
        if !matches!(self.rule, FusionRule::NaiveAdd | FusionRule::Add) {
            return Err(Error::WrongRule(format!(
                "additive update needs the add or naive-add rule, state uses `{}`",
                self.rule
            )));
        }
        self.check_dim(selected)?;
        self.advanced(self.current.add(selected)?)
    }

    /// One-shot concatenation of the enrollment with the keyframe.
    pub fn concat_update(&self, selected: &Embedding) -> Result<Self> {
        if self.rule != FusionRule::Concat {
            return Err(Error::WrongRule(format!(
                "concatenation needs the cat rule, state uses `{}`",
                self.rule
            )));
        }
        if self.n != 1 {
            return Err(concat_not_iterable());
        }
        self.check_dim(selected)?;
        self.advanced(fuse_concat(&self.enroll, selected)?)
    }

    /// Apply the configured rule to a keyframe. `None`, and `Add` once it
    /// has fired, leave the state untouched.
    pub fn apply(&self, selected: &Embedding) -> Result<Self> {
        match self.rule {
            FusionRule::None => Ok(self.clone()),
            FusionRule::Add if self.n > 1 => Ok(self.clone()),
            FusionRule::Add | FusionRule::NaiveAdd => self.naive_iterative_update(selected),
            FusionRule::Concat => self.concat_update(selected),
            FusionRule::WeightedResidual { .. } => self.long_term_update(selected),
        }
    }

    /// Select the keyframe of `segment` against the current reference and
    /// apply the rule. A segment without a qualifying frame leaves the state
    /// unchanged.
    pub fn step(&self, segment: &SegmentFrames) -> Result<(Self, TraceRecord)> {
        if segment.is_empty() {
            return Err(Error::EmptySegment);
        }
        let scores = score_frames(segment, &self.current)?;
        let (next, selected, similarity) = match best_at_or_above(&scores, self.selection.threshold)
        {
            Some((index, sim)) => (self.apply(&segment.embeddings()[index])?, Some(index), sim),
            None => {
                let best = scores.iter().copied().fold(UNSCORABLE, f64::max);
                (self.clone(), None, best)
            }
        };
        let record = TraceRecord {
            segment_id: segment.segment_id(),
            n: next.n,
            selected,
            similarity,
            current: next.current.clone(),
        };
        Ok((next, record))
    }
}

fn concat_not_iterable() -> Error {
    Error::WrongRule(
        "concatenation fusion is one-shot: iterating it would grow the reference dimension \
         without bound, so it is only supported for a single segment (use add, weighted or \
         naive-add for long-term adaptation)"
            .into(),
    )
}

/// Everything that parameterises a run over segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationConfig {
    pub rule: FusionRule,
    pub selection: SelectionConfig,
    /// Length-normalise the enrollment and every frame before use.
    #[serde(default)]
    pub normalize_inputs: bool,
    /// Length-normalise the reference after each update.
    #[serde(default)]
    pub renormalize: bool,
}

impl AdaptationConfig {
    pub fn new(rule: FusionRule, selection: SelectionConfig) -> Self {
        AdaptationConfig {
            rule,
            selection,
            normalize_inputs: false,
            renormalize: false,
        }
    }
}

/// Outcome of processing one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub segment_id: u32,
    /// Iteration counter after this segment.
    pub n: u32,
    /// Keyframe index, `None` when nothing reached the threshold.
    pub selected: Option<usize>,
    /// Keyframe similarity, or the best (sub-threshold) score on `NoKeyframe`.
    pub similarity: f64,
    /// Reference after this segment.
    pub current: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationTrace {
    pub enroll: Embedding,
    pub config: AdaptationConfig,
    pub records: Vec<TraceRecord>,
}

impl AdaptationTrace {
    /// Reference after the last processed segment.
    pub fn final_reference(&self) -> &Embedding {
        self.records
            .last()
            .map(|r| &r.current)
            .unwrap_or(&self.enroll)
    }

    /// Reference in effect when segment number `position` (0-based, in
    /// processing order) is scored: the enrollment for the first segment,
    /// the previous record's reference after that.
    pub fn reference_before(&self, position: usize) -> &Embedding {
        match position {
            0 => &self.enroll,
            p => &self.records[(p - 1).min(self.records.len().saturating_sub(1))].current,
        }
    }
}

/// Run the adaptation loop over `segments` in order.
pub fn run_adaptation(
    segments: &[SegmentFrames],
    enroll: &Embedding,
    cfg: &AdaptationConfig,
) -> Result<AdaptationTrace> {
    if cfg.rule == FusionRule::Concat && segments.len() > 1 {
        return Err(concat_not_iterable());
    }
    for w in segments.windows(2) {
        if w[1].segment_id() <= w[0].segment_id() {
            return Err(Error::InvalidConfig(format!(
                "segments must be strictly ordered by id ({} follows {})",
                w[1].segment_id(),
                w[0].segment_id()
            )));
        }
    }
    let enroll = if cfg.normalize_inputs {
        enroll.l2_normalize()?
    } else {
        enroll.clone()
    };
    let mut state = AdaptationState::new(enroll.clone(), cfg.rule, cfg.selection)?
        .with_renormalize(cfg.renormalize);
    let mut records = Vec::with_capacity(segments.len());
    for segment in segments {
        let (next, record) = if cfg.normalize_inputs {
            state.step(&segment.normalized())?
        } else {
            state.step(segment)?
        };
        state = next;
        records.push(record);
    }
    Ok(AdaptationTrace {
        enroll,
        config: *cfg,
        records,
    })
}
