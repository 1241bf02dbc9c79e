//! Seeded generator of synthetic multi-speaker conversations as labelled
//! embedding streams.
//!
//! Generative model, per session:
//!
//! * a shared unit direction `m` and, per speaker, a unique unit direction
//!   `u_k` and a common fraction `rho_k`; the speaker direction is
//!   `d_k = normalize(sqrt(rho_k) m + sqrt(1 - rho_k) u_k)`, so two speakers
//!   have cosine close to `sqrt(rho_i rho_j)`;
//! * between segments each `u_k` drifts: `u_k <- normalize(u_k + drift * w)`;
//! * each segment is a sequence of single-speaker utterances separated by
//!   silence, with every speaker appearing at least once;
//! * a speech frame is the normalized mean of the speaker directions inside
//!   its analysis window plus a perturbation of norm `frame_noise_sigma`
//!   (log-normally jittered);
//! * enrollment for each duration tag is the target direction at the first
//!   segment plus a perturbation whose norm is set by the tag.
//!
//! All perturbations are `sigma * w` with `w` uniform on the unit sphere, so
//! a sigma is directly the length of the noise vector.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, Embedding, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::segment::{FrameLabel, SegmentFrames, DEFAULT_HOP_SECONDS, DEFAULT_WINDOW_SECONDS};

/// Activity below this value means non-speech, by construction.
pub const ACTIVITY_GATE: f64 = 0.5;

const SILENCE_NORM: f64 = 0.05;
const SPEECH_ACTIVITY: (f64, f64) = (0.6, 1.0);
const SILENCE_ACTIVITY: (f64, f64) = (0.0, 0.4);

/// Enrollment duration condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnrollTag {
    #[serde(rename = "0.5s")]
    HalfSecond,
    #[serde(rename = "1s")]
    OneSecond,
    #[serde(rename = "1.5s")]
    OneAndHalfSeconds,
    #[serde(rename = "full")]
    Full,
}

impl EnrollTag {
    pub const ALL: [EnrollTag; 4] = [
        EnrollTag::HalfSecond,
        EnrollTag::OneSecond,
        EnrollTag::OneAndHalfSeconds,
        EnrollTag::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnrollTag::HalfSecond => "0.5s",
            EnrollTag::OneSecond => "1s",
            EnrollTag::OneAndHalfSeconds => "1.5s",
            EnrollTag::Full => "full",
        }
    }
}

impl fmt::Display for EnrollTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnrollTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnrollTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

/// Noise norm per enrollment tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollSigmas {
    #[serde(rename = "0.5s")]
    pub half_second: f64,
    #[serde(rename = "1s")]
    pub one_second: f64,
    #[serde(rename = "1.5s")]
    pub one_and_half_seconds: f64,
    pub full: f64,
}

impl Default for EnrollSigmas {
    fn default() -> Self {
        EnrollSigmas {
            half_second: 1.35,
            one_second: 0.95,
            one_and_half_seconds: 0.7,
            full: 0.17,
        }
    }
}

impl EnrollSigmas {
    pub fn get(&self, tag: EnrollTag) -> f64 {
        match tag {
            EnrollTag::HalfSecond => self.half_second,
            EnrollTag::OneSecond => self.one_second,
            EnrollTag::OneAndHalfSeconds => self.one_and_half_seconds,
            EnrollTag::Full => self.full,
        }
    }

    pub fn uniform(sigma: f64) -> Self {
        EnrollSigmas {
            half_second: sigma,
            one_second: sigma,
            one_and_half_seconds: sigma,
            full: sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    #[default]
    Off,
    On,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub dim: usize,
    pub num_speakers: usize,
    pub num_segments: usize,
    pub frames_per_segment: usize,
    /// Inclusive range of utterance lengths, in frames.
    pub utterance_length_frames: (usize, usize),
    pub silence_ratio: f64,
    pub frame_noise_sigma: f64,
    /// Log-normal spread of the per-frame noise norm.
    pub frame_noise_spread: f64,
    pub enroll_noise_sigma: EnrollSigmas,
    /// Log-normal spread of the enrollment noise norm, drawn once per tag.
    pub enroll_quality_spread: f64,
    pub drift_per_segment: f64,
    /// Range of the fraction of each speaker direction shared by all speakers.
    pub speaker_common_fraction: (f64, f64),
    pub hop_seconds: f64,
    pub window_seconds: f64,
    pub snr_noise_mode: NoiseMode,
    /// Extra perturbation norm applied to every frame when the noise mode is on.
    pub snr_noise_sigma: f64,
    /// Standard deviation of the activity jitter when the noise mode is on.
    pub activity_jitter: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dim: DEFAULT_DIM,
            num_speakers: 3,
            num_segments: 10,
            frames_per_segment: 120,
            utterance_length_frames: (10, 40),
            silence_ratio: 0.15,
            frame_noise_sigma: 1.0,
            frame_noise_spread: 0.0,
            enroll_noise_sigma: EnrollSigmas::default(),
            enroll_quality_spread: 0.3,
            drift_per_segment: 0.45,
            speaker_common_fraction: (0.4, 0.85),
            hop_seconds: DEFAULT_HOP_SECONDS,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            snr_noise_mode: NoiseMode::Off,
            snr_noise_sigma: 0.5,
            activity_jitter: 0.1,
            seed: 0,
        }
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        if self.num_speakers < 2 {
            return bad(format!(
                "num_speakers must be >= 2, got {}",
                self.num_speakers
            ));
        }
        if self.num_segments == 0 {
            return bad("num_segments must be >= 1".into());
        }
        if self.frames_per_segment == 0 {
            return bad("frames_per_segment must be >= 1".into());
        }
        let (lo, hi) = self.utterance_length_frames;
        if lo == 0 || lo > hi {
            return bad(format!(
                "utterance_length_frames must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"
            ));
        }
        if !self.silence_ratio.is_finite() || !(0.0..1.0).contains(&self.silence_ratio) {
            return bad(format!(
                "silence_ratio must lie in [0, 1), got {}",
                self.silence_ratio
            ));
        }
        non_negative("frame_noise_sigma", self.frame_noise_sigma)?;
        non_negative("frame_noise_spread", self.frame_noise_spread)?;
        for tag in EnrollTag::ALL {
            non_negative(
                &format!("enroll_noise_sigma[{tag}]"),
                self.enroll_noise_sigma.get(tag),
            )?;
        }
        non_negative("enroll_quality_spread", self.enroll_quality_spread)?;
        non_negative("drift_per_segment", self.drift_per_segment)?;
        non_negative("snr_noise_sigma", self.snr_noise_sigma)?;
        non_negative("activity_jitter", self.activity_jitter)?;
        let (clo, chi) = self.speaker_common_fraction;
        if !(clo.is_finite() && chi.is_finite() && 0.0 <= clo && clo <= chi && chi <= 1.0) {
            return bad(format!(
                "speaker_common_fraction must satisfy 0 <= lo <= hi <= 1, got [{clo}, {chi}]"
            ));
        }
        // reuse the segment's own timing checks
        SegmentFrames::with_timing(
            0,
            vec![],
            vec![],
            None,
            self.hop_seconds,
            self.window_seconds,
        )?;
        Ok(())
    }

    /// Number of hops covered by one analysis window.
    pub fn window_frames(&self) -> usize {
        ((self.window_seconds / self.hop_seconds).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSession {
    pub config: SimulationConfig,
    pub segments: Vec<SegmentFrames>,
    pub enrollment: BTreeMap<EnrollTag, Embedding>,
    pub target_speaker: usize,
    /// `[segment][speaker]` unit directions.
    pub true_directions: Vec<Vec<Embedding>>,
    /// `[segment][frame]` speaker index, `None` for silence.
    pub frame_speakers: Vec<Vec<Option<usize>>>,
    /// Pairwise cosine of the speaker directions at the first segment.
    pub speaker_similarity: Vec<Vec<f64>>,
}

impl SimulatedSession {
    pub fn enrollment(&self, tag: EnrollTag) -> Result<&Embedding> {
        self.enrollment
            .get(&tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Result<Vec<f64>> {
    Ok(Embedding::new(v)?.l2_normalize()?.into_vec())
}

/// `normalize(v + scale * w)`, `w` uniform on the sphere.
fn perturb(rng: &mut ChaCha8Rng, v: &[f64], scale: f64) -> Result<Vec<f64>> {
    let w = unit_vector(rng, v.len());
    normalized(v.iter().zip(&w).map(|(a, b)| a + scale * b).collect())
}

fn speaker_directions(common: &[f64], unique: &[Vec<f64>], rho: &[f64]) -> Result<Vec<Vec<f64>>> {
    unique
        .iter()
        .zip(rho)
        .map(|(u, &r)| {
            let (a, b) = (r.sqrt(), (1.0 - r).sqrt());
            normalized(common.iter().zip(u).map(|(m, x)| a * m + b * x).collect())
        })
        .collect()
}

/// Utterance/silence layout of one segment: speaker per frame.
fn timeline(rng: &mut ChaCha8Rng, cfg: &SimulationConfig) -> Vec<Option<usize>> {
    let t = cfg.frames_per_segment;
    let n_sil = ((cfg.silence_ratio * t as f64).round() as usize).min(t);
    let mut speech = t - n_sil;
    let (lo, hi) = cfg.utterance_length_frames;
    let mut first_pass: Vec<usize> = (0..cfg.num_speakers).collect();
    first_pass.shuffle(rng);
    let mut first_pass = first_pass.into_iter();
    let mut utts: Vec<(usize, usize)> = Vec::new();
    let mut last = None;
    while speech > 0 {
        // leave room for speakers still owed their first utterance
        let owed = first_pass.len().saturating_sub(1);
        let reserve = owed * lo.min(speech / (owed + 1));
        let len = rng.random_range(lo..=hi).min(speech - reserve).max(1);
        let spk = match first_pass.next() {
            Some(s) => s,
            None => {
                let last = last.expect("at least one utterance drawn");
                let s = rng.random_range(0..cfg.num_speakers - 1);
                if s >= last {
                    s + 1
                } else {
                    s
                }
            }
        };
        utts.push((spk, len));
        speech -= len;
        last = Some(spk);
    }
    let mut gaps = vec![0usize; utts.len() + 1];
    let n_gaps = gaps.len();
    for _ in 0..n_sil {
        gaps[rng.random_range(0..n_gaps)] += 1;
    }
    let mut out = Vec::with_capacity(t);
    for (i, gap) in gaps.iter().enumerate() {
        out.extend(std::iter::repeat_n(None, *gap));
        if let Some(&(spk, len)) = utts.get(i) {
            out.extend(std::iter::repeat_n(Some(spk), len));
        }
    }
    out
}

/// Mean of the speaker directions active in the window centred on `i`.
fn window_base(speakers: &[Option<usize>], dirs: &[Vec<f64>], i: usize, w: usize) -> Vec<f64> {
    let dim = dirs[0].len();
    let h = w / 2;
    let start = i.saturating_sub(h);
    let end = (i + w - h).min(speakers.len());
    let mut acc = vec![0.0; dim];
    let mut count = 0usize;
    for s in speakers[start..end].iter().flatten() {
        for (a, d) in acc.iter_mut().zip(&dirs[*s]) {
            *a += d;
        }
        count += 1;
    }
    let c = count.max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= c);
    acc
}

pub fn generate_session(cfg: &SimulationConfig) -> Result<SimulatedSession> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (d, s_count) = (cfg.dim, cfg.num_speakers);

    let common = unit_vector(&mut rng, d);
    let (clo, chi) = cfg.speaker_common_fraction;
    let rho: Vec<f64> = (0..s_count).map(|_| rng.random_range(clo..=chi)).collect();
    let mut unique: Vec<Vec<f64>> = (0..s_count).map(|_| unit_vector(&mut rng, d)).collect();
    let target = rng.random_range(0..s_count);
    let mut dirs = speaker_directions(&common, &unique, &rho)?;

    let mut enrollment = BTreeMap::new();
    for tag in EnrollTag::ALL {
        let jitter: f64 = rng.sample(StandardNormal);
        let mag = cfg.enroll_noise_sigma.get(tag) * (cfg.enroll_quality_spread * jitter).exp();
        enrollment.insert(tag, Embedding::new(perturb(&mut rng, &dirs[target], mag)?)?);
    }

    let w = cfg.window_frames();
    let noisy = cfg.snr_noise_mode == NoiseMode::On;
    let mut segments = Vec::with_capacity(cfg.num_segments);
    let mut true_directions = Vec::with_capacity(cfg.num_segments);
    let mut frame_speakers = Vec::with_capacity(cfg.num_segments);
    for seg in 0..cfg.num_segments {
        if seg > 0 {
            for u in unique.iter_mut() {
                *u = perturb(&mut rng, u, cfg.drift_per_segment)?;
            }
            dirs = speaker_directions(&common, &unique, &rho)?;
        }
        let speakers = timeline(&mut rng, cfg);
        let mut embeddings = Vec::with_capacity(speakers.len());
        let mut activity = Vec::with_capacity(speakers.len());
        let mut labels = Vec::with_capacity(speakers.len());
        for (i, spk) in speakers.iter().enumerate() {
            let (mut frame, mut act) = match spk {
                Some(_) => {
                    let base = window_base(&speakers, &dirs, i, w);
                    let jitter: f64 = rng.sample(StandardNormal);
                    let mag = cfg.frame_noise_sigma * (cfg.frame_noise_spread * jitter).exp();
                    let f = perturb(&mut rng, &base, mag)?;
                    (f, rng.random_range(SPEECH_ACTIVITY.0..=SPEECH_ACTIVITY.1))
                }
                None => {
                    let f = unit_vector(&mut rng, d)
                        .into_iter()
                        .map(|x| SILENCE_NORM * x)
                        .collect();
                    (f, rng.random_range(SILENCE_ACTIVITY.0..=SILENCE_ACTIVITY.1))
                }
            };
            if noisy {
                let w = unit_vector(&mut rng, d);
                frame
                    .iter_mut()
                    .zip(&w)
                    .for_each(|(a, b)| *a += cfg.snr_noise_sigma * b);
                let j: f64 = rng.sample(StandardNormal);
                act += cfg.activity_jitter * j;
                act = match spk {
                    Some(_) => {
                        frame = normalized(frame)?;
                        act.clamp(ACTIVITY_GATE, 1.0)
                    }
                    None => act.clamp(0.0, ACTIVITY_GATE - 1e-9),
                };
            }
            labels.push(match spk {
                None => FrameLabel::NonSpeech,
                Some(k) if *k == target => FrameLabel::TargetSpeech,
                Some(_) => FrameLabel::NonTargetSpeech,
            });
            embeddings.push(Embedding::new(frame)?);
            activity.push(act);
        }
        segments.push(SegmentFrames::with_timing(
            seg as u32 + 1,
            embeddings,
            activity,
            Some(labels),
            cfg.hop_seconds,
            cfg.window_seconds,
        )?);
        true_directions.push(
            dirs.iter()
                .map(|v| Embedding::new(v.clone()))
                .collect::<Result<Vec<_>>>()?,
        );
        frame_speakers.push(speakers);
    }

    let first = &true_directions[0];
    let speaker_similarity = first
        .iter()
        .map(|a| {
            first
                .iter()
                .map(|b| cosine_similarity(a, b))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimulatedSession {
        config: cfg.clone(),
        segments,
        enrollment,
        target_speaker: target,
        true_directions,
        frame_speakers,
        speaker_similarity,
    })
}

/// Cosine between the tag's enrollment and the target direction at the
/// first segment.
pub fn enrollment_quality(session: &SimulatedSession, tag: EnrollTag) -> Result<f64> {
    let e = session.enrollment(tag)?;
    let d = &session.true_directions[0][session.target_speaker];
    cosine_similarity(e, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SimulationConfig {
        SimulationConfig {
            dim: 32,
            num_segments: 3,
            frames_per_segment: 60,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_session() {
        let a = generate_session(&small(7)).unwrap();
        let b = generate_session(&small(7)).unwrap();
        assert_eq!(a, b);
        let c = generate_session(&small(8)).unwrap();
        assert_ne!(a.segments, c.segments);
    }

    #[test]
    fn shapes_and_labels() {
        let s = generate_session(&small(1)).unwrap();
        assert_eq!(s.segments.len(), 3);
        assert_eq!(s.enrollment.len(), 4);
        for (k, seg) in s.segments.iter().enumerate() {
            assert_eq!(seg.segment_id(), k as u32 + 1);
            assert_eq!(seg.len(), 60);
            assert_eq!(seg.dim(), Some(32));
            let labels = seg.labels().unwrap();
            for ((l, a), spk) in labels.iter().zip(seg.activity()).zip(&s.frame_speakers[k]) {
                assert_eq!(*l == FrameLabel::NonSpeech, *a < ACTIVITY_GATE);
                match spk {
                    None => assert_eq!(*l, FrameLabel::NonSpeech),
                    Some(x) if *x == s.target_speaker => assert_eq!(*l, FrameLabel::TargetSpeech),
                    Some(_) => assert_eq!(*l, FrameLabel::NonTargetSpeech),
                }
            }
            // every speaker talks in every segment
            for spk in 0..3 {
                assert!(s.frame_speakers[k].contains(&Some(spk)));
            }
        }
    }

    #[test]
    fn noiseless_frames_match_their_speaker() {
        let cfg = SimulationConfig {
            frame_noise_sigma: 0.0,
            silence_ratio: 0.0,
            window_seconds: DEFAULT_HOP_SECONDS,
            ..small(3)
        };
        let s = generate_session(&cfg).unwrap();
        for (k, seg) in s.segments.iter().enumerate() {
            for (e, spk) in seg.embeddings().iter().zip(&s.frame_speakers[k]) {
                let d = &s.true_directions[k][spk.unwrap()];
                assert!((cosine_similarity(e, d).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_enroll_sigma_gives_perfect_quality() {
        let cfg = SimulationConfig {
            enroll_noise_sigma: EnrollSigmas::uniform(0.0),
            ..small(4)
        };
        let s = generate_session(&cfg).unwrap();
        for tag in EnrollTag::ALL {
            assert!((enrollment_quality(&s, tag).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_mode_keeps_labels_consistent() {
        let cfg = SimulationConfig {
            snr_noise_mode: NoiseMode::On,
            activity_jitter: 0.5,
            ..small(5)
        };
        let s = generate_session(&cfg).unwrap();
        for seg in &s.segments {
            for (l, a) in seg.labels().unwrap().iter().zip(seg.activity()) {
                assert_eq!(*l == FrameLabel::NonSpeech, *a < ACTIVITY_GATE);
            }
        }
        let clean = generate_session(&small(5)).unwrap();
        assert_ne!(clean.segments, s.segments);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SimulationConfig {
                num_speakers: 1,
                ..Default::default()
            },
            SimulationConfig {
                num_segments: 0,
                ..Default::default()
            },
            SimulationConfig {
                frame_noise_sigma: -0.1,
                ..Default::default()
            },
            SimulationConfig {
                utterance_length_frames: (5, 2),
                ..Default::default()
            },
            SimulationConfig {
                silence_ratio: 1.0,
                ..Default::default()
            },
            SimulationConfig {
                speaker_common_fraction: (0.5, 1.2),
                ..Default::default()
            },
            SimulationConfig {
                window_seconds: 0.1,
                ..Default::default()
            },
            SimulationConfig {
                enroll_noise_sigma: EnrollSigmas::uniform(f64::NAN),
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(generate_session(&cfg), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn tags_parse() {
        for t in EnrollTag::ALL {
            assert_eq!(t.as_str().parse::<EnrollTag>().unwrap(), t);
        }
        assert!(matches!(
            "2s".parse::<EnrollTag>(),
            Err(Error::UnknownTag(_))
        ));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let j = serde_json::to_string(&SimulationConfig::default()).unwrap();
        let back: SimulationConfig = serde_json::from_str(&j).unwrap();
        assert_eq!(back, SimulationConfig::default());
        assert!(serde_json::from_str::<SimulationConfig>(r#"{"dims": 4}"#).is_err());
        let partial: SimulationConfig = serde_json::from_str(r#"{"dim": 4}"#).unwrap();
        assert_eq!(partial.dim, 4);
        assert_eq!(partial.num_segments, 10);
    }

    fn default_sessions() -> Vec<SimulatedSession> {
        (0..100)
            .map(|seed| {
                generate_session(&SimulationConfig {
                    num_segments: 3,
                    seed,
                    ..Default::default()
                })
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn statistics_over_seeds() {
        let sessions = default_sessions();
        let n = sessions.len() as f64;

        let ns: f64 = sessions
            .iter()
            .flat_map(|s| &s.segments)
            .map(|seg| {
                let l = seg.labels().unwrap();
                l.iter().filter(|&&x| x == FrameLabel::NonSpeech).count() as f64 / l.len() as f64
            })
            .sum::<f64>()
            / (3.0 * n);
        assert!((ns - 0.15).abs() <= 0.05, "NS fraction {ns}");

        let quality = |tag| {
            sessions
                .iter()
                .map(|s| enrollment_quality(s, tag).unwrap())
                .sum::<f64>()
                / n
        };
        let q = EnrollTag::ALL.map(quality);
        assert!(q[3] > q[2] && q[2] > q[1] && q[1] > q[0], "quality {q:?}");

        // consecutive-segment cosine of each speaker's direction
        let mut drift = Vec::new();
        for s in &sessions {
            for k in 1..s.true_directions.len() {
                for (a, b) in s.true_directions[k - 1].iter().zip(&s.true_directions[k]) {
                    drift.push(cosine_similarity(a, b).unwrap());
                }
            }
        }
        let mean_drift = drift.iter().sum::<f64>() / drift.len() as f64;
        assert!(
            (0.94..=0.99).contains(&mean_drift),
            "drift cosine {mean_drift}"
        );
        assert!(drift.iter().all(|&c| c < 1.0));

        let target = |s: &SimulatedSession| s.true_directions[0][s.target_speaker].clone();
        let cross: Vec<f64> = sessions
            .windows(2)
            .map(|w| cosine_similarity(&target(&w[0]), &target(&w[1])).unwrap())
            .collect();
        let mean_cross = cross.iter().sum::<f64>() / cross.len() as f64;
        assert!(mean_cross.abs() < 0.05, "cross-seed cosine {mean_cross}");
        assert!(cross.iter().all(|c| c.abs() < 0.4));
    }

    #[test]
    fn oracle_detector_is_exact_without_noise() {
        use crate::detector::{decide_segment, DetectorConfig};
        for seed in 0..100 {
            let s = generate_session(&SimulationConfig {
                dim: 64,
                num_segments: 2,
                frame_noise_sigma: 0.0,
                window_seconds: DEFAULT_HOP_SECONDS,
                speaker_common_fraction: (0.0, 0.2),
                seed,
                ..Default::default()
            })
            .unwrap();
            for (k, seg) in s.segments.iter().enumerate() {
                let oracle = &s.true_directions[k][s.target_speaker];
                let det = decide_segment(seg, oracle, &DetectorConfig::default()).unwrap();
                assert_eq!(
                    det.decisions,
                    seg.labels().unwrap(),
                    "seed {seed} segment {k}"
                );
            }
        }
    }
}
