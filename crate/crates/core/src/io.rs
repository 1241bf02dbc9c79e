//! File formats.
//!
//! Segment container (`EMB1`, all integers little-endian):
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `EMB1` |
//! | 4  | 2 | version (1) |
//! | 6  | 4 | dim |
//! | 10 | 4 | frame_count |
//! | 14 | 4 | hop_ms |
//! | 18 | 4 | window_ms |
//! | 22 | 4 | flags: bit0 labels, bit1 activity |
//! | 26 | `4 * frame_count * dim` | frames, f32 |
//! |    | `4 * frame_count` | activity, f32 (bit1) |
//! |    | `frame_count` | labels, 0 = NS, 1 = NTSS, 2 = TSS (bit0) |
//!
//! Enrollment container (`ENR1`): magic, u16 version, u32 dim, then `dim`
//! f32 values, with a JSON sidecar next to it (`<file>.json`).
//!
//! Both readers also accept JSON Lines: one `{"e": [...], "a": 0.9, "y": "TSS"}`
//! object per frame for segments (`a` and `y` optional), a single
//! `{"e": [...]}` object for enrollments.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::augmentation::{
    AdaptationConfig, AdaptationTrace, FusionRule, TraceRecord, DEFAULT_LAMBDA,
};
use crate::detector::DetectionResult;
use crate::embedding::Embedding;
use crate::error::{Error, FormatError, FormatErrorKind as K, Result};
use crate::segment::{FrameLabel, SegmentFrames, DEFAULT_HOP_SECONDS, DEFAULT_WINDOW_SECONDS};
use crate::selection::SelectionConfig;
use crate::simulator::{EnrollTag, SimulatedSession, SimulationConfig};

pub const SEGMENT_MAGIC: &[u8; 4] = b"EMB1";
pub const ENROLLMENT_MAGIC: &[u8; 4] = b"ENR1";
pub const FORMAT_VERSION: u16 = 1;
pub const SEGMENT_HEADER_LEN: usize = 26;
pub const ENROLLMENT_HEADER_LEN: usize = 10;
pub const FLAG_LABELS: u32 = 1;
pub const FLAG_ACTIVITY: u32 = 2;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

type FResult<T> = std::result::Result<T, FormatError>;

fn ferr<T>(kind: K, offset: usize, detail: impl Into<String>) -> FResult<T> {
    Err(FormatError::new(kind, offset as u64, detail))
}

fn u16_at(b: &[u8], o: usize) -> u16 {
    u16::from_le_bytes([b[o], b[o + 1]])
}

fn u32_at(b: &[u8], o: usize) -> u32 {
    u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn f32_at(b: &[u8], o: usize) -> f32 {
    f32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]])
}

fn check_magic(bytes: &[u8], magic: &[u8; 4]) -> FResult<()> {
    let n = bytes.len().min(4);
    if bytes[..n] != magic[..n] {
        return ferr(
            K::BadMagic,
            0,
            format!(
                "expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&bytes[..n])
            ),
        );
    }
    Ok(())
}

fn check_length(len: usize, expected: u128) -> FResult<()> {
    let len64 = len as u128;
    if len64 < expected {
        return ferr(
            K::TruncatedFile,
            len,
            format!("expected {expected} bytes, found {len}"),
        );
    }
    if len64 > expected {
        return Err(FormatError::new(
            K::TrailingBytes,
            expected as u64,
            format!("{} bytes past the declared end", len64 - expected),
        ));
    }
    Ok(())
}

fn seconds_to_ms(s: f64) -> Result<u32> {
    let ms = (s * 1000.0).round();
    if !(1.0..=f64::from(u32::MAX)).contains(&ms) {
        return Err(Error::InvalidConfig(format!(
            "timing {s}s is not representable in whole milliseconds"
        )));
    }
    Ok(ms as u32)
}

/// Serialize a segment to the binary container. Activity is always written.
pub fn encode_segment(seg: &SegmentFrames) -> Result<Vec<u8>> {
    let dim = seg.dim().unwrap_or(0);
    let t = seg.len();
    let mut flags = FLAG_ACTIVITY;
    if seg.labels().is_some() {
        flags |= FLAG_LABELS;
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(SEGMENT_HEADER_LEN + t * (dim * 4 + 5));
    out.extend_from_slice(SEGMENT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(dim, "dim")?.to_le_bytes());
    out.extend_from_slice(&to_u32(t, "frame count")?.to_le_bytes());
    out.extend_from_slice(&seconds_to_ms(seg.hop_seconds())?.to_le_bytes());
    out.extend_from_slice(&seconds_to_ms(seg.window_seconds())?.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    for e in seg.embeddings() {
        for v in e.to_f32() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "segment {} value overflows f32",
                    seg.segment_id()
                )));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &a in seg.activity() {
        out.extend_from_slice(&(a as f32).to_le_bytes());
    }
    if let Some(labels) = seg.labels() {
        out.extend(labels.iter().map(|l| l.to_byte()));
    }
    Ok(out)
}

/// Parse the binary container. Every error names the byte offset at fault.
pub fn decode_segment(bytes: &[u8], segment_id: u32) -> FResult<SegmentFrames> {
    check_magic(bytes, SEGMENT_MAGIC)?;
    if bytes.len() < SEGMENT_HEADER_LEN {
        return ferr(
            K::TruncatedFile,
            bytes.len(),
            format!(
                "header needs {SEGMENT_HEADER_LEN} bytes, found {}",
                bytes.len()
            ),
        );
    }
    let version = u16_at(bytes, 4);
    if version != FORMAT_VERSION {
        return ferr(K::VersionUnsupported, 4, format!("version {version}"));
    }
    let dim = u32_at(bytes, 6) as u128;
    let t = u32_at(bytes, 10) as u128;
    let hop_ms = u32_at(bytes, 14);
    let window_ms = u32_at(bytes, 18);
    let flags = u32_at(bytes, 22);
    if flags & !(FLAG_LABELS | FLAG_ACTIVITY) != 0 {
        return ferr(
            K::InvalidHeader,
            22,
            format!("unknown flag bits {flags:#x}"),
        );
    }
    if dim == 0 && t > 0 {
        return ferr(K::InvalidHeader, 6, "dim 0 with a nonzero frame count");
    }
    if hop_ms == 0 {
        return ferr(K::InvalidHeader, 14, "hop_ms is 0");
    }
    if window_ms < hop_ms {
        return ferr(
            K::InvalidHeader,
            18,
            format!("window_ms {window_ms} shorter than hop_ms {hop_ms}"),
        );
    }
    let has_labels = flags & FLAG_LABELS != 0;
    let has_activity = flags & FLAG_ACTIVITY != 0;
    let frames_len = t * dim * 4;
    let activity_len = if has_activity { t * 4 } else { 0 };
    let labels_len = if has_labels { t } else { 0 };
    let expected = SEGMENT_HEADER_LEN as u128 + frames_len + activity_len + labels_len;
    check_length(bytes.len(), expected)?;
    let (dim, t) = (dim as usize, t as usize);

    let mut off = SEGMENT_HEADER_LEN;
    let mut embeddings = Vec::with_capacity(t);
    for _ in 0..t {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            let v = f32_at(bytes, off);
            if !v.is_finite() {
                return ferr(K::NonFiniteValue, off, format!("frame value {v}"));
            }
            row.push(f64::from(v));
            off += 4;
        }
        embeddings.push(Embedding::new(row).expect("dim >= 1 and finite values"));
    }
    let activity = if has_activity {
        let mut a = Vec::with_capacity(t);
        for _ in 0..t {
            let v = f32_at(bytes, off);
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return ferr(
                    K::InvalidActivity,
                    off,
                    format!("activity {v} outside [0, 1]"),
                );
            }
            a.push(f64::from(v));
            off += 4;
        }
        a
    } else {
        vec![1.0; t]
    };
    let labels = if has_labels {
        let mut l = Vec::with_capacity(t);
        for &b in &bytes[off..off + t] {
            match FrameLabel::from_byte(b) {
                Some(x) => l.push(x),
                None => return ferr(K::BadLabelByte, off, format!("label byte {b}")),
            }
            off += 1;
        }
        Some(l)
    } else {
        None
    };
    SegmentFrames::with_timing(
        segment_id,
        embeddings,
        activity,
        labels,
        f64::from(hop_ms) / 1000.0,
        f64::from(window_ms) / 1000.0,
    )
    .map_err(|e| FormatError::new(K::InvalidHeader, 14, e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonFrame {
    e: Vec<f64>,
    #[serde(default)]
    a: Option<f64>,
    #[serde(default)]
    y: Option<FrameLabel>,
}

#[derive(Debug, Serialize)]
struct JsonFrameOut<'a> {
    e: &'a [f64],
    a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<FrameLabel>,
}

fn utf8(bytes: &[u8]) -> FResult<&str> {
    std::str::from_utf8(bytes)
        .map_err(|e| FormatError::new(K::BadJsonLine, e.valid_up_to() as u64, "input is not UTF-8"))
}

/// Non-empty lines with their starting byte offsets.
fn json_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let line = raw.trim();
        (!line.is_empty()).then_some((start, line))
    })
}

pub fn decode_segment_jsonl(bytes: &[u8], segment_id: u32) -> FResult<SegmentFrames> {
    let text = utf8(bytes)?;
    let mut embeddings = Vec::new();
    let mut activity = Vec::new();
    let mut labels: Vec<FrameLabel> = Vec::new();
    let mut labelled: Option<bool> = None;
    for (off, line) in json_lines(text) {
        let frame: JsonFrame = serde_json::from_str(line)
            .map_err(|e| FormatError::new(K::BadJsonLine, off as u64, e.to_string()))?;
        let e = Embedding::new(frame.e)
            .map_err(|e| FormatError::new(K::BadJsonLine, off as u64, e.to_string()))?;
        if let Some(first) = embeddings.first().map(Embedding::dim) {
            if e.dim() != first {
                return ferr(
                    K::BadJsonLine,
                    off,
                    format!("dimension {} differs from first frame's {first}", e.dim()),
                );
            }
        }
        let a = frame.a.unwrap_or(1.0);
        if !(0.0..=1.0).contains(&a) {
            return ferr(
                K::InvalidActivity,
                off,
                format!("activity {a} outside [0, 1]"),
            );
        }
        match (labelled, frame.y) {
            (None, y) => labelled = Some(y.is_some()),
            (Some(true), Some(_)) | (Some(false), None) => {}
            _ => {
                return ferr(
                    K::BadJsonLine,
                    off,
                    "labels must be given for all frames or none",
                )
            }
        }
        if let Some(y) = frame.y {
            labels.push(y);
        }
        embeddings.push(e);
        activity.push(a);
    }
    let labels = (labelled == Some(true)).then_some(labels);
    SegmentFrames::with_timing(
        segment_id,
        embeddings,
        activity,
        labels,
        DEFAULT_HOP_SECONDS,
        DEFAULT_WINDOW_SECONDS,
    )
    .map_err(|e| FormatError::new(K::BadJsonLine, 0, e.to_string()))
}

pub fn encode_segment_jsonl(seg: &SegmentFrames) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (i, (e, &a)) in seg.embeddings().iter().zip(seg.activity()).enumerate() {
        let frame = JsonFrameOut {
            e: e.as_slice(),
            a,
            y: seg.labels().map(|l| l[i]),
        };
        serde_json::to_writer(&mut out, &frame)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn looks_like_json(path: &Path, bytes: &[u8]) -> bool {
    path.extension().is_some_and(|x| x == "jsonl")
        || bytes
            .iter()
            .find(|b| !b.is_ascii_whitespace())
            .is_some_and(|&b| b == b'{')
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn at(path: &Path) -> impl FnOnce(FormatError) -> Error + '_ {
    move |source| Error::Format {
        path: path.to_path_buf(),
        source,
    }
}

/// Decode either container from memory, sniffing binary vs JSON Lines.
pub fn parse_segment(bytes: &[u8], segment_id: u32) -> FResult<SegmentFrames> {
    if bytes.starts_with(SEGMENT_MAGIC) || !looks_like_json(Path::new(""), bytes) {
        decode_segment(bytes, segment_id)
    } else {
        decode_segment_jsonl(bytes, segment_id)
    }
}

/// Read a segment file; standalone reads get segment id 0.
pub fn read_segment(path: impl AsRef<Path>) -> Result<SegmentFrames> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let seg = if bytes.starts_with(SEGMENT_MAGIC) || !looks_like_json(path, &bytes) {
        decode_segment(&bytes, 0)
    } else {
        decode_segment_jsonl(&bytes, 0)
    };
    seg.map_err(at(path))
}

pub fn write_segment(seg: &SegmentFrames, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_segment(seg)?)
}

pub fn write_segment_jsonl(seg: &SegmentFrames, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_segment_jsonl(seg)?)
}

pub fn encode_enrollment(e: &Embedding) -> Result<Vec<u8>> {
    let dim = u32::try_from(e.dim())
        .map_err(|_| Error::InvalidConfig(format!("dim {} exceeds u32", e.dim())))?;
    let mut out = Vec::with_capacity(ENROLLMENT_HEADER_LEN + 4 * e.dim());
    out.extend_from_slice(ENROLLMENT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for v in e.to_f32() {
        if !v.is_finite() {
            return Err(Error::NonFinite("enrollment value overflows f32".into()));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_enrollment(bytes: &[u8]) -> FResult<Embedding> {
    check_magic(bytes, ENROLLMENT_MAGIC)?;
    if bytes.len() < ENROLLMENT_HEADER_LEN {
        return ferr(
            K::TruncatedFile,
            bytes.len(),
            format!(
                "header needs {ENROLLMENT_HEADER_LEN} bytes, found {}",
                bytes.len()
            ),
        );
    }
    let version = u16_at(bytes, 4);
    if version != FORMAT_VERSION {
        return ferr(K::VersionUnsupported, 4, format!("version {version}"));
    }
    let dim = u32_at(bytes, 6) as u64;
    if dim == 0 {
        return ferr(K::SizeMismatch, 6, "zero-length payload");
    }
    check_length(
        bytes.len(),
        ENROLLMENT_HEADER_LEN as u128 + 4 * u128::from(dim),
    )?;
    let mut values = Vec::with_capacity(dim as usize);
    for i in 0..dim as usize {
        let off = ENROLLMENT_HEADER_LEN + 4 * i;
        let v = f32_at(bytes, off);
        if !v.is_finite() {
            return ferr(K::NonFiniteValue, off, format!("value {v}"));
        }
        values.push(f64::from(v));
    }
    Ok(Embedding::new(values).expect("dim >= 1 and finite values"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEnrollment {
    e: Vec<f64>,
}

pub fn decode_enrollment_jsonl(bytes: &[u8]) -> FResult<Embedding> {
    let text = utf8(bytes)?;
    let mut lines = json_lines(text);
    let Some((off, line)) = lines.next() else {
        return ferr(K::SizeMismatch, 0, "zero-length payload");
    };
    let parsed: JsonEnrollment = serde_json::from_str(line)
        .map_err(|e| FormatError::new(K::BadJsonLine, off as u64, e.to_string()))?;
    if parsed.e.is_empty() {
        return ferr(K::SizeMismatch, off, "zero-length payload");
    }
    if let Some((extra, _)) = lines.next() {
        return ferr(K::TrailingBytes, extra, "enrollment holds a single object");
    }
    Embedding::new(parsed.e)
        .map_err(|e| FormatError::new(K::BadJsonLine, off as u64, e.to_string()))
}

pub fn read_enrollment(path: impl AsRef<Path>) -> Result<Embedding> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let e = if bytes.starts_with(ENROLLMENT_MAGIC) || !looks_like_json(path, &bytes) {
        decode_enrollment(&bytes)
    } else {
        decode_enrollment_jsonl(&bytes)
    };
    e.map_err(at(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnrollmentMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<EnrollTag>,
    pub source: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".json");
    PathBuf::from(s)
}

/// Write the binary enrollment and its metadata sidecar.
pub fn write_enrollment(
    e: &Embedding,
    meta: &EnrollmentMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    write_bytes(path, &encode_enrollment(e)?)?;
    write_json(&sidecar_path(path), meta)
}

pub fn read_enrollment_meta(path: impl AsRef<Path>) -> Result<EnrollmentMeta> {
    read_json(&sidecar_path(path.as_ref()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Lists the segment and enrollment files of one session. Paths are
/// relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_speaker: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
    pub segments: Vec<PathBuf>,
    pub enrollments: BTreeMap<EnrollTag, PathBuf>,
}

#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub dir: PathBuf,
}

impl LoadedManifest {
    /// Accepts the manifest file or the directory holding `manifest.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let manifest: Manifest = read_json(&file)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::InvalidConfig(format!(
                "{}: manifest version {} unsupported",
                file.display(),
                manifest.version
            )));
        }
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedManifest { manifest, dir })
    }

    /// Segments in manifest order, numbered from 1.
    pub fn segments(&self) -> Result<Vec<SegmentFrames>> {
        self.manifest
            .segments
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut seg = read_segment(self.dir.join(p))?;
                seg.set_segment_id(i as u32 + 1);
                Ok(seg)
            })
            .collect()
    }

    pub fn enrollment(&self, tag: EnrollTag) -> Result<Embedding> {
        let p = self
            .manifest
            .enrollments
            .get(&tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))?;
        read_enrollment(self.dir.join(p))
    }
}

/// Write every segment, every enrollment and the manifest into `dir`.
pub fn write_session(session: &SimulatedSession, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = session.segments.len().to_string().len().max(2);
    let mut segments = Vec::with_capacity(session.segments.len());
    for seg in &session.segments {
        let name = PathBuf::from(format!("segment_{:0width$}.emb", seg.segment_id()));
        write_segment(seg, dir.join(&name))?;
        segments.push(name);
    }
    let mut enrollments = BTreeMap::new();
    for (tag, e) in &session.enrollment {
        let name = PathBuf::from(format!("enroll_{tag}.enr"));
        let meta = EnrollmentMeta {
            tag: Some(*tag),
            source: "simulator".into(),
            dim: e.dim(),
            seed: Some(session.config.seed),
        };
        write_enrollment(e, &meta, dir.join(&name))?;
        enrollments.insert(*tag, name);
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: Some(session.config.seed),
        target_speaker: Some(session.target_speaker),
        config: Some(session.config.clone()),
        segments,
        enrollments,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Configuration echo stored next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub threshold: f64,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enroll_tag: Option<EnrollTag>,
    pub normalize_inputs: bool,
    pub renormalize: bool,
    pub segments: usize,
    pub enroll: Embedding,
}

impl TraceSidecar {
    pub fn new(trace: &AdaptationTrace, enroll_tag: Option<EnrollTag>) -> Self {
        TraceSidecar {
            rule: trace.config.rule.name().into(),
            lambda: trace.config.rule.lambda(),
            threshold: trace.config.selection.threshold,
            dim: trace.enroll.dim(),
            enroll_tag,
            normalize_inputs: trace.config.normalize_inputs,
            renormalize: trace.config.renormalize,
            segments: trace.records.len(),
            enroll: trace.enroll.clone(),
        }
    }

    pub fn config(&self) -> Result<AdaptationConfig> {
        Ok(AdaptationConfig {
            rule: FusionRule::parse(&self.rule, self.lambda.unwrap_or(DEFAULT_LAMBDA))?,
            selection: SelectionConfig::new(self.threshold)?,
            normalize_inputs: self.normalize_inputs,
            renormalize: self.renormalize,
        })
    }
}

/// The sidecar of `trace.csv` is `trace.json`.
pub fn trace_sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn encode_trace_csv(trace: &AdaptationTrace) -> Result<Vec<u8>> {
    let width = trace
        .records
        .iter()
        .map(|r| r.current.dim())
        .max()
        .unwrap_or(trace.enroll.dim());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "segment_id".to_string(),
        "n".into(),
        "selected_index".into(),
        "similarity".into(),
    ];
    header.extend((0..width).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![
            r.segment_id.to_string(),
            r.n.to_string(),
            r.selected.map_or("-1".to_string(), |i| i.to_string()),
            r.similarity.to_string(),
        ];
        row.extend(r.current.as_slice().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

pub fn write_trace(
    trace: &AdaptationTrace,
    sidecar: &TraceSidecar,
    csv_path: impl AsRef<Path>,
) -> Result<()> {
    let csv_path = csv_path.as_ref();
    write_bytes(csv_path, &encode_trace_csv(trace)?)?;
    write_json(&trace_sidecar_path(csv_path), sidecar)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidConfig(format!("trace row has a bad {what} field")))
}

pub fn read_trace(csv_path: impl AsRef<Path>) -> Result<(AdaptationTrace, TraceSidecar)> {
    let csv_path = csv_path.as_ref();
    let sidecar: TraceSidecar = read_json(&trace_sidecar_path(csv_path))?;
    let config = sidecar.config()?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let selected: i64 = parse_field(&rec, 2, "selected_index")?;
        let values = (4..rec.len())
            .map(|i| parse_field::<f64>(&rec, i, "embedding"))
            .collect::<Result<Vec<_>>>()?;
        records.push(TraceRecord {
            segment_id: parse_field(&rec, 0, "segment_id")?,
            n: parse_field(&rec, 1, "n")?,
            selected: usize::try_from(selected).ok(),
            similarity: parse_field(&rec, 3, "similarity")?,
            current: Embedding::new(values)?,
        });
    }
    let trace = AdaptationTrace {
        enroll: sidecar.enroll.clone(),
        config,
        records,
    };
    Ok((trace, sidecar))
}

pub fn encode_detections_csv(det: &DetectionResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame_index", "label", "score"])?;
    for (i, (l, s)) in det.decisions.iter().zip(&det.scores).enumerate() {
        w.write_record([i.to_string(), l.to_string(), s.to_string()])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv buffer: {e}")))
}

pub fn write_detections(det: &DetectionResult, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_detections_csv(det)?)
}

/// Serialize rows with a header derived from the row type.
pub fn write_rows_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
