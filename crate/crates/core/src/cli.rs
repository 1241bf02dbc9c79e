//! Command-line front end: `simulate`, `augment`, `evaluate`, `sweep`.
//!
//! Settings come from an optional JSON run configuration, overridden by
//! flags. Every failure is reported on stderr as one line,
//! `error[CODE]: message`, with a nonzero exit status.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::augmentation::{AdaptationConfig, FusionRule, DEFAULT_LAMBDA, LAMBDA_SWEEP};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::experiment::{
    detect_and_score, pooled_report, reference_n, sweep_session, sweep_simulated, SweepPlan,
    SweepRow,
};
use crate::io::{
    read_trace, write_detections, write_json, write_rows_csv, write_session, write_trace,
    LoadedManifest, TraceSidecar, MANIFEST_FILE,
};
use crate::metrics::{MetricsReport, CLASS_SCORE_CONVENTION};
use crate::selection::SelectionConfig;
use crate::simulator::{generate_session, EnrollTag, SimulationConfig};

const RULE_NAMES: [&str; 5] = ["none", "cat", "add", "weighted", "naive-add"];
const TAG_NAMES: [&str; 4] = ["0.5s", "1s", "1.5s", "full"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionSettings {
    pub rule: String,
    pub lambda: f64,
    pub normalize_inputs: bool,
    pub renormalize: bool,
}

impl Default for FusionSettings {
    fn default() -> Self {
        FusionSettings {
            rule: "weighted".into(),
            lambda: DEFAULT_LAMBDA,
            normalize_inputs: false,
            renormalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub lambdas: Vec<f64>,
    pub tags: Vec<EnrollTag>,
    pub rules: Vec<String>,
    /// Sessions to simulate when no manifest is given, starting at the
    /// simulation seed.
    pub seeds: u64,
    pub manifests: Vec<PathBuf>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            lambdas: LAMBDA_SWEEP.to_vec(),
            tags: EnrollTag::ALL.to_vec(),
            rules: vec![
                "none".into(),
                "add".into(),
                "weighted".into(),
                "naive-add".into(),
            ],
            seeds: 1,
            manifests: Vec::new(),
        }
    }
}

/// JSON run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub simulation: SimulationConfig,
    pub selection: SelectionConfig,
    pub fusion: FusionSettings,
    pub detector: DetectorConfig,
    pub enroll_tag: EnrollTag,
    pub sweep: SweepSettings,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            simulation: SimulationConfig::default(),
            selection: SelectionConfig::default(),
            fusion: FusionSettings::default(),
            detector: DetectorConfig::default(),
            enroll_tag: EnrollTag::HalfSecond,
            sweep: SweepSettings::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_raw(path).map(|(cfg, _)| cfg)
    }

    fn load_raw(path: &Path) -> Result<(Self, serde_json::Value)> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |e: serde_json::Error| Error::InvalidConfig(format!("{}: {e}", path.display()));
        let raw: serde_json::Value = serde_json::from_slice(&text).map_err(bad)?;
        let cfg = serde_json::from_value(raw.clone()).map_err(bad)?;
        Ok((cfg, raw))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.selection.validate()?;
        self.detector.validate()?;
        self.fusion_rule()?;
        for r in &self.sweep.rules {
            FusionRule::parse(r, DEFAULT_LAMBDA)?;
        }
        for &l in &self.sweep.lambdas {
            FusionRule::weighted(l)?;
        }
        Ok(())
    }

    pub fn fusion_rule(&self) -> Result<FusionRule> {
        FusionRule::parse(&self.fusion.rule, self.fusion.lambda)
    }

    pub fn adaptation(&self) -> Result<AdaptationConfig> {
        Ok(AdaptationConfig {
            rule: self.fusion_rule()?,
            selection: self.selection,
            normalize_inputs: self.fusion.normalize_inputs,
            renormalize: self.fusion.renormalize,
        })
    }

    fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("an output directory is required (--out)".into()))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "selfaug",
    version,
    about = "Speaker-embedding self-augmentation for personal VAD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Residual weight of the weighted rule.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Keyframe selection threshold (inclusive).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true, value_parser = RULE_NAMES)]
    pub rule: Option<String>,
    #[arg(long = "enroll-tag", global = true, value_parser = TAG_NAMES)]
    pub enroll_tag: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session: segment files, enrollments, manifest.
    Simulate,
    /// Run the adaptation loop over a manifest's segments and write the trace.
    Augment {
        /// Manifest file or the directory containing it.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Score every segment and write per-segment metrics.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Trace CSV from `augment`; without it the enrollment is used throughout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Long-form metrics over rules, lambdas, tags, segments and sessions.
    Sweep {
        /// Manifests to sweep; when absent, sessions are simulated in memory.
        #[arg(long)]
        manifest: Vec<PathBuf>,
        /// Number of simulated sessions.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_parser = TAG_NAMES)]
        tags: Vec<String>,
        #[arg(long, value_delimiter = ',', value_parser = RULE_NAMES)]
        rules: Vec<String>,
    },
}

/// Flag-over-file configuration, plus whether the selection threshold was
/// stated explicitly by either.
fn resolve_config(common: &CommonArgs) -> Result<(RunConfig, bool)> {
    let (mut cfg, mut threshold_stated) = match &common.config {
        Some(p) => {
            let (cfg, raw) = RunConfig::load_raw(p)?;
            (cfg, raw.pointer("/selection/threshold").is_some())
        }
        None => (RunConfig::default(), false),
    };
    threshold_stated |= common.threshold.is_some();
    if let Some(s) = common.seed {
        cfg.simulation.seed = s;
    }
    if let Some(l) = common.lambda {
        cfg.fusion.lambda = l;
    }
    if let Some(t) = common.threshold {
        cfg.selection.threshold = t;
    }
    if let Some(r) = &common.rule {
        cfg.fusion.rule = r.clone();
    }
    if let Some(t) = &common.enroll_tag {
        cfg.enroll_tag = t.parse()?;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok((cfg, threshold_stated))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let out = cfg.out_dir()?;
    let session = generate_session(&cfg.simulation)?;
    let manifest = write_session(&session, out)?;
    Ok(format!(
        "wrote {} ({} segments, {} enrollments)",
        out.join(MANIFEST_FILE).display(),
        manifest.segments.len(),
        manifest.enrollments.len()
    ))
}

fn cmd_augment(cfg: &RunConfig, manifest: &Path) -> Result<String> {
    let out = cfg.out_dir()?;
    let adaptation = cfg.adaptation()?;
    let m = LoadedManifest::load(manifest)?;
    let segments = m.segments()?;
    let enroll = m.enrollment(cfg.enroll_tag)?;
    let trace = crate::augmentation::run_adaptation(&segments, &enroll, &adaptation)?;
    create_dir(out)?;
    let path = out.join("trace.csv");
    write_trace(
        &trace,
        &TraceSidecar::new(&trace, Some(cfg.enroll_tag)),
        &path,
    )?;
    let updates = trace
        .records
        .iter()
        .filter(|r| r.selected.is_some())
        .count();
    Ok(format!(
        "wrote {} ({} segments, {} with a keyframe, rule {})",
        path.display(),
        trace.records.len(),
        updates,
        adaptation.rule
    ))
}

#[derive(Debug, Serialize)]
struct SegmentEntry {
    segment_id: u32,
    reference_n: u32,
    metrics: MetricsReport,
}

#[derive(Debug, Serialize)]
struct EvaluationDoc {
    reference: &'static str,
    enroll_tag: Option<EnrollTag>,
    rule: String,
    lambda: Option<f64>,
    selection_threshold: Option<f64>,
    detector: DetectorConfig,
    class_score_convention: &'static str,
    segments: Vec<SegmentEntry>,
    pooled: MetricsReport,
}

fn cmd_evaluate(cfg: &RunConfig, manifest: &Path, trace_path: Option<&Path>) -> Result<String> {
    let out = cfg.out_dir()?;
    let m = LoadedManifest::load(manifest)?;
    let segments = m.segments()?;
    if segments.is_empty() {
        return Err(Error::EmptyInput);
    }
    for seg in &segments {
        seg.require_labels()?;
    }
    let (references, ns, reference, tag, rule, lambda, threshold) = match trace_path {
        Some(p) => {
            let (trace, side) = read_trace(p)?;
            crate::experiment::check_alignment(&segments, &trace)?;
            let refs: Vec<_> = (0..segments.len())
                .map(|k| trace.reference_before(k).clone())
                .collect();
            let ns = (0..segments.len())
                .map(|k| reference_n(&trace, k))
                .collect();
            (
                refs,
                ns,
                "trace",
                side.enroll_tag,
                side.rule.clone(),
                side.lambda,
                Some(side.threshold),
            )
        }
        None => {
            let e = m.enrollment(cfg.enroll_tag)?;
            (
                vec![e; segments.len()],
                vec![1; segments.len()],
                "enrollment",
                Some(cfg.enroll_tag),
                "none".to_string(),
                None,
                None,
            )
        }
    };
    let det_dir = out.join("detections");
    create_dir(&det_dir)?;
    let width = segments.len().to_string().len().max(2);
    let mut entries = Vec::with_capacity(segments.len());
    let mut detections = Vec::with_capacity(segments.len());
    let mut rows = Vec::with_capacity(segments.len());
    for ((seg, r), &n) in segments.iter().zip(&references).zip(&ns) {
        let (det, metrics) = detect_and_score(seg, r, &cfg.detector)?;
        write_detections(
            &det,
            det_dir.join(format!("segment_{:0width$}.csv", seg.segment_id())),
        )?;
        rows.push(SweepRow::new(
            m.manifest.seed,
            &rule,
            lambda,
            tag.unwrap_or(cfg.enroll_tag),
            seg.segment_id(),
            n,
            &metrics,
        ));
        entries.push(SegmentEntry {
            segment_id: seg.segment_id(),
            reference_n: n,
            metrics,
        });
        detections.push(det);
    }
    let doc = EvaluationDoc {
        reference,
        enroll_tag: tag,
        rule,
        lambda,
        selection_threshold: threshold,
        detector: cfg.detector,
        class_score_convention: CLASS_SCORE_CONVENTION,
        pooled: pooled_report(&segments, &detections)?,
        segments: entries,
    };
    write_json(&out.join("metrics.json"), &doc)?;
    write_rows_csv(&rows, out.join("metrics.csv"))?;
    let f1: Vec<String> = doc
        .segments
        .iter()
        .map(|s| format!("{:.3}", s.metrics.f1))
        .collect();
    Ok(format!(
        "wrote {} (TSS F1 per segment: {})",
        out.join("metrics.json").display(),
        f1.join(" ")
    ))
}

fn cmd_sweep(
    cfg: &RunConfig,
    manifests: &[PathBuf],
    seeds: Option<u64>,
    lambdas: &[f64],
    tags: &[String],
    rules: &[String],
) -> Result<String> {
    let out = cfg.out_dir()?;
    let plan = SweepPlan {
        rules: if rules.is_empty() {
            cfg.sweep.rules.clone()
        } else {
            rules.to_vec()
        },
        lambdas: if lambdas.is_empty() {
            cfg.sweep.lambdas.clone()
        } else {
            lambdas.to_vec()
        },
        tags: if tags.is_empty() {
            cfg.sweep.tags.clone()
        } else {
            tags.iter().map(|t| t.parse()).collect::<Result<_>>()?
        },
        selection: cfg.selection,
        detector: cfg.detector,
        normalize_inputs: cfg.fusion.normalize_inputs,
        renormalize: cfg.fusion.renormalize,
    };
    for &l in &plan.lambdas {
        FusionRule::weighted(l)?;
    }
    let manifests = if manifests.is_empty() {
        cfg.sweep.manifests.clone()
    } else {
        manifests.to_vec()
    };
    let mut rows = Vec::new();
    let sessions = if manifests.is_empty() {
        let count = seeds.unwrap_or(cfg.sweep.seeds);
        if count == 0 {
            return Err(Error::InvalidConfig("--seeds must be at least 1".into()));
        }
        for i in 0..count {
            let sim = SimulationConfig {
                seed: cfg.simulation.seed.wrapping_add(i),
                ..cfg.simulation.clone()
            };
            rows.extend(sweep_simulated(&generate_session(&sim)?, &plan)?);
        }
        count as usize
    } else {
        for p in &manifests {
            let m = LoadedManifest::load(p)?;
            let segments = m.segments()?;
            let mut enrollments = BTreeMap::new();
            for &tag in &plan.tags {
                enrollments.insert(tag, m.enrollment(tag)?);
            }
            rows.extend(sweep_session(
                m.manifest.seed,
                &segments,
                &enrollments,
                &plan,
            )?);
        }
        manifests.len()
    };
    create_dir(out)?;
    let path = out.join("sweep.csv");
    write_rows_csv(&rows, &path)?;
    Ok(format!(
        "wrote {} ({} rows from {} sessions)",
        path.display(),
        rows.len(),
        sessions
    ))
}

/// Execute a parsed command line; returns the summary printed on success.
pub fn run(cli: &Cli) -> Result<String> {
    let (cfg, threshold_stated) = resolve_config(&cli.common)?;
    cfg.validate()?;
    if matches!(cli.command, Command::Augment { .. } | Command::Sweep { .. }) && !threshold_stated {
        return Err(Error::InvalidConfig(
            "the keyframe selection threshold must be stated with --threshold or selection.threshold in --config".into(),
        ));
    }
    match &cli.command {
        Command::Simulate => cmd_simulate(&cfg),
        Command::Augment { manifest } => cmd_augment(&cfg, manifest),
        Command::Evaluate { manifest, trace } => cmd_evaluate(&cfg, manifest, trace.as_deref()),
        Command::Sweep {
            manifest,
            seeds,
            lambdas,
            tags,
            rules,
        } => cmd_sweep(&cfg, manifest, *seeds, lambdas, tags, rules),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse `args`, run, print, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[Usage]: {}", one_line(msg));
            return 2;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), one_line(&e.to_string()));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"simulation": {"dim": 8}}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"simulaton": {}}"#).is_err());
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"fusion": {"rule": "add", "x": 1}}"#).is_err()
        );
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "selfaug",
            "augment",
            "--manifest",
            "m",
            "--lambda",
            "0.3",
            "--threshold",
            "-0.2",
            "--rule",
            "naive-add",
            "--enroll-tag",
            "1s",
            "--seed",
            "9",
            "--out",
            "o",
        ])
        .unwrap();
        let (cfg, stated) = resolve_config(&cli.common).unwrap();
        assert!(stated);
        assert_eq!(cfg.fusion.lambda, 0.3);
        assert_eq!(cfg.selection.threshold, -0.2);
        assert_eq!(cfg.fusion.rule, "naive-add");
        assert_eq!(cfg.enroll_tag, EnrollTag::OneSecond);
        assert_eq!(cfg.simulation.seed, 9);
        assert_eq!(cfg.out.as_deref(), Some(Path::new("o")));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.fusion.lambda = 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.selection.threshold = 3.0;
        assert!(cfg.validate().is_err());
        assert!(Cli::try_parse_from(["selfaug", "simulate", "--rule", "mean"]).is_err());
    }

    #[test]
    fn one_line_collapses_whitespace() {
        assert_eq!(one_line("a\n  b\tc"), "a b c");
    }
}
