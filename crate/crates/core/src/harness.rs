//! Experiment grid: train on clean neutral speech, test every feature
//! method under every disguise effect, and render accuracy tables.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_manifest, read_wav, AudioClip, Emotion, UtteranceRecord};
use crate::classifier::{pool_utterance, svm_predict, train_svm, SvmModel, SvmParams};
use crate::corpus::{is_testing, is_training};
use crate::disguise::{DisguiseSpec, Effect, DEFAULT_CARRIER_HZ, DEFAULT_HIGH_SEMITONES, DEFAULT_LOW_SEMITONES};
use crate::error::{Error, Result};
use crate::features::{extract, FeatureConfig, FeatureMethod};
use crate::plda::{plda_identify, train_plda, PldaModel, PldaOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BACKEND_LABEL: &str = "pooled-SVM (CNN-SVM stand-in)";
pub const ACCURACY_COLUMN: &str = "Average Speaker Identification Accuracy";

/// A row of the result tables: a feature method with its backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMethod {
    MfccDd,
    Lpc,
    Dwpd,
    Dct,
    Plda,
}

impl ExperimentMethod {
    pub const ALL: [ExperimentMethod; 5] = [
        ExperimentMethod::MfccDd,
        ExperimentMethod::Lpc,
        ExperimentMethod::Dwpd,
        ExperimentMethod::Dct,
        ExperimentMethod::Plda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentMethod::MfccDd => "mfcc_dd",
            ExperimentMethod::Lpc => "lpc",
            ExperimentMethod::Dwpd => "dwpd",
            ExperimentMethod::Dct => "dct",
            ExperimentMethod::Plda => "plda",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ExperimentMethod::MfccDd => "MFCCs Δ²",
            ExperimentMethod::Lpc => "LPC",
            ExperimentMethod::Dwpd => "Hybrid Algorithm DWPD",
            ExperimentMethod::Dct => "DCT",
            ExperimentMethod::Plda => "PLDA",
        }
    }

    /// Frame features feeding the backend. PLDA consumes pooled MFCC Δ²
    /// embeddings in place of i-vectors.
    pub fn feature_method(self) -> FeatureMethod {
        match self {
            ExperimentMethod::MfccDd | ExperimentMethod::Plda => FeatureMethod::MfccDeltaDelta,
            ExperimentMethod::Lpc => FeatureMethod::Lpc,
            ExperimentMethod::Dwpd => FeatureMethod::Dwpd,
            ExperimentMethod::Dct => FeatureMethod::Dct,
        }
    }
}

impl fmt::Display for ExperimentMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisguiseParams {
    pub high_semitones: f64,
    pub low_semitones: f64,
    pub carrier_hz: f64,
}

impl Default for DisguiseParams {
    fn default() -> Self {
        Self {
            high_semitones: DEFAULT_HIGH_SEMITONES,
            low_semitones: DEFAULT_LOW_SEMITONES,
            carrier_hz: DEFAULT_CARRIER_HZ,
        }
    }
}

impl DisguiseParams {
    pub fn spec(&self, effect: Effect) -> DisguiseSpec {
        let mut spec = DisguiseSpec::default_for(effect);
        match effect {
            Effect::HighPitched => spec.semitones = self.high_semitones,
            Effect::LowPitched => spec.semitones = self.low_semitones,
            Effect::Evc => spec.carrier_hz = self.carrier_hz,
            Effect::None => {}
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub methods: Vec<ExperimentMethod>,
    pub effects: Vec<Effect>,
    pub disguise: DisguiseParams,
    pub features: FeatureConfig,
    pub svm: SvmParams,
    pub plda: PldaOptions,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from(crate::corpus::MANIFEST_NAME),
            methods: ExperimentMethod::ALL.to_vec(),
            effects: Effect::ALL.to_vec(),
            disguise: DisguiseParams::default(),
            features: FeatureConfig::default(),
            svm: SvmParams::default(),
            plda: PldaOptions::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.effects.is_empty() {
            return Err(Error::param("methods and effects must be non-empty"));
        }
        for e in &self.effects {
            self.disguise.spec(*e).validate()?;
        }
        Ok(())
    }

    /// Methods and effects in canonical order without duplicates.
    fn grid(&self) -> (Vec<ExperimentMethod>, Vec<Effect>) {
        let methods = ExperimentMethod::ALL
            .into_iter()
            .filter(|m| self.methods.contains(m))
            .collect();
        let effects = Effect::ALL.into_iter().filter(|e| self.effects.contains(e)).collect();
        (methods, effects)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionTally {
    pub emotion: Emotion,
    pub n_correct: usize,
    pub n_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: ExperimentMethod,
    pub effect: Effect,
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub per_emotion: Vec<EmotionTally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub backend: String,
    pub config: ExperimentConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub cells: Vec<CellResult>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn cell(&self, method: ExperimentMethod, effect: Effect) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.method == method && c.effect == effect)
    }
}

/// Fraction of pairs whose predicted id equals the true id.
pub fn compute_accuracy<S: AsRef<str>>(predictions: &[(S, S)]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::param("no predictions to score"));
    }
    let hits = predictions.iter().filter(|(t, p)| t.as_ref() == p.as_ref()).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Trained backend for one method.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Svm(SvmModel),
    Plda(PldaModel),
}

impl Backend {
    pub fn identify(&self, embedding: &[f64]) -> Result<String> {
        match self {
            Backend::Svm(m) => svm_predict(m, embedding).map(|(id, _)| id),
            Backend::Plda(m) => plda_identify(m, embedding).map(|(id, _)| id),
        }
    }

    /// Per-speaker scores: SVM decision values or PLDA log-likelihood ratios.
    pub fn scores(&self, embedding: &[f64]) -> Result<Vec<(String, f64)>> {
        match self {
            Backend::Svm(m) => {
                let values = m.decision_values(embedding)?;
                Ok(m.classes.iter().cloned().zip(values).collect())
            }
            Backend::Plda(m) => plda_identify(m, embedding).map(|(_, s)| s),
        }
    }
}

/// Trains the backend of `method` on labelled utterance embeddings.
pub fn train_backend(
    method: ExperimentMethod,
    embeddings: &[Vec<f64>],
    labels: &[String],
    svm: &SvmParams,
    plda: &PldaOptions,
    warnings: &mut Vec<String>,
) -> Result<Backend> {
    match method {
        ExperimentMethod::Plda => {
            let t = train_plda(embeddings, labels, plda)?;
            warnings.extend(t.warnings.into_iter().map(|w| format!("plda: {w}")));
            Ok(Backend::Plda(t.model))
        }
        _ => {
            let (model, reports) = train_svm(embeddings, labels, svm)?;
            for (class, r) in model.classes.iter().zip(&reports) {
                if !r.converged {
                    warnings.push(format!(
                        "{method}: SMO for '{class}' stopped after {} iterations without converging",
                        r.iterations
                    ));
                }
            }
            Ok(Backend::Svm(model))
        }
    }
}

/// Feature extraction plus pooling for one clip.
pub fn embed(clip: &AudioClip, method: FeatureMethod, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let m = extract(clip, method, cfg)?;
    Ok(pool_utterance(&m)?.values)
}

fn stage_error(method: &str, effect: &str, record: &UtteranceRecord, e: Error) -> Error {
    Error::Stage {
        method: method.to_string(),
        effect: effect.to_string(),
        utterance: record.label(),
        source: Box::new(e),
    }
}

/// Embeddings of one utterance for each distinct feature method, in the
/// order given.
fn embed_all(
    record: &UtteranceRecord,
    clip: &AudioClip,
    effect: Effect,
    features: &[FeatureMethod],
    cfg: &FeatureConfig,
) -> Result<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|fm| embed(clip, *fm, cfg).map_err(|e| stage_error(fm.as_str(), effect.as_str(), record, e)))
        .collect()
}

fn load(record: &UtteranceRecord) -> Result<AudioClip> {
    read_wav(&record.path).map_err(|e| stage_error("load", "none", record, e))
}

/// Runs the configured grid. Audio is read once per utterance; each
/// disguised rendering is embedded once per distinct feature method and
/// shared by every row that needs it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let records = load_manifest(&cfg.manifest)?;
    run_on_records(cfg, &records)
}

/// As [`run_experiment`] with an already loaded manifest.
pub fn run_on_records(cfg: &ExperimentConfig, records: &[UtteranceRecord]) -> Result<EvalReport> {
    cfg.validate()?;
    let (methods, effects) = cfg.grid();
    let train: Vec<&UtteranceRecord> = records.iter().filter(|r| is_training(r)).collect();
    let test: Vec<&UtteranceRecord> = records.iter().filter(|r| is_testing(r)).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::param(format!(
            "manifest needs training and testing records (found {} and {})",
            train.len(),
            test.len()
        )));
    }
    let mut feature_methods: Vec<FeatureMethod> = Vec::new();
    for m in &methods {
        if !feature_methods.contains(&m.feature_method()) {
            feature_methods.push(m.feature_method());
        }
    }

    // train_emb[utterance][feature]
    let train_emb: Vec<Vec<Vec<f64>>> = train
        .par_iter()
        .map(|r| {
            let clip = load(r)?;
            embed_all(r, &clip, Effect::None, &feature_methods, &cfg.features)
        })
        .collect::<Result<_>>()?;

    // test_emb[utterance][effect][feature]
    let test_emb: Vec<Vec<Vec<Vec<f64>>>> = test
        .par_iter()
        .map(|r| {
            let clip = load(r)?;
            effects
                .iter()
                .map(|&effect| {
                    let disguised = cfg
                        .disguise
                        .spec(effect)
                        .apply(&clip)
                        .map_err(|e| stage_error("disguise", effect.as_str(), r, e))?;
                    embed_all(r, &disguised, effect, &feature_methods, &cfg.features)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let labels: Vec<String> = train.iter().map(|r| r.speaker_id.clone()).collect();
    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    for &method in &methods {
        let fi = feature_methods
            .iter()
            .position(|f| *f == method.feature_method())
            .expect("feature planned");
        let x: Vec<Vec<f64>> = train_emb.iter().map(|u| u[fi].clone()).collect();
        let mut svm = cfg.svm.clone();
        svm.seed = cfg.seed;
        let backend = train_backend(method, &x, &labels, &svm, &cfg.plda, &mut warnings).map_err(|e| Error::Stage {
            method: method.as_str().into(),
            effect: "none".into(),
            utterance: "(training)".into(),
            source: Box::new(e),
        })?;
        for (ei, &effect) in effects.iter().enumerate() {
            let predictions: Vec<String> = test
                .par_iter()
                .zip(&test_emb)
                .map(|(r, emb)| {
                    backend
                        .identify(&emb[ei][fi])
                        .map_err(|e| stage_error(method.as_str(), effect.as_str(), r, e))
                })
                .collect::<Result<_>>()?;
            cells.push(tally(method, effect, &test, &predictions));
        }
    }

    Ok(EvalReport {
        version: VERSION.to_string(),
        backend: BACKEND_LABEL.to_string(),
        config: cfg.clone(),
        n_train: train.len(),
        n_test: test.len(),
        cells,
        warnings,
    })
}

fn tally(method: ExperimentMethod, effect: Effect, test: &[&UtteranceRecord], predictions: &[String]) -> CellResult {
    let mut by_emotion: BTreeMap<Emotion, (usize, usize)> = BTreeMap::new();
    let mut n_correct = 0;
    for (r, p) in test.iter().zip(predictions) {
        let hit = r.speaker_id == *p;
        n_correct += hit as usize;
        let slot = by_emotion.entry(r.emotion).or_default();
        slot.0 += hit as usize;
        slot.1 += 1;
    }
    CellResult {
        method,
        effect,
        accuracy: n_correct as f64 / test.len() as f64,
        n_correct,
        n_total: test.len(),
        per_emotion: by_emotion
            .into_iter()
            .map(|(emotion, (n_correct, n_total))| EmotionTally {
                emotion,
                n_correct,
                n_total,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::param(format!("unknown report format '{other}'"))),
        }
    }
}

/// Cells of one effect, best first; ties keep the canonical method order.
fn ranked(report: &EvalReport, effect: Effect) -> Vec<&CellResult> {
    let mut rows: Vec<&CellResult> = report.cells.iter().filter(|c| c.effect == effect).collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.method.cmp(&b.method)));
    rows
}

fn report_effects(report: &EvalReport) -> Vec<Effect> {
    Effect::ALL
        .into_iter()
        .filter(|e| report.cells.iter().any(|c| c.effect == *e))
        .collect()
}

fn pct(accuracy: f64) -> String {
    format!("{:.1}", accuracy * 100.0)
}

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> String {
    let config_json = serde_json::to_string(&report.config).expect("config serializes");
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        ReportFormat::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# version: {}", report.version);
            let _ = writeln!(s, "# backend: {}", report.backend);
            let _ = writeln!(s, "# config: {config_json}");
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["effect", "method", "accuracy_pct", "n_correct", "n_total"])
                .expect("writing to memory");
            for effect in report_effects(report) {
                for c in ranked(report, effect) {
                    w.write_record([
                        effect.as_str(),
                        c.method.as_str(),
                        &pct(c.accuracy),
                        &c.n_correct.to_string(),
                        &c.n_total.to_string(),
                    ])
                    .expect("writing to memory");
                }
            }
            s + &String::from_utf8(w.into_inner().expect("flushing memory writer")).expect("utf-8 csv")
        }
        ReportFormat::Markdown => {
            let mut s = String::new();
            let _ = writeln!(s, "# Speaker identification under voice disguise\n");
            let _ = writeln!(s, "- version: {}", report.version);
            let _ = writeln!(s, "- backend: {}", report.backend);
            let _ = writeln!(s, "- training utterances: {}", report.n_train);
            let _ = writeln!(s, "- testing utterances: {}\n", report.n_test);
            for effect in report_effects(report) {
                let _ = writeln!(s, "## {} effect\n", effect.display_name());
                let _ = writeln!(s, "| Technique | {ACCURACY_COLUMN} |");
                let _ = writeln!(s, "|---|---|");
                for c in ranked(report, effect) {
                    let _ = writeln!(s, "| {} | {}% |", c.method.display_name(), pct(c.accuracy));
                }
                s.push('\n');
            }
            if !report.warnings.is_empty() {
                let _ = writeln!(s, "## Warnings\n");
                for w in &report.warnings {
                    let _ = writeln!(s, "- {w}");
                }
                s.push('\n');
            }
            let _ = writeln!(s, "## Configuration\n\n```json\n{config_json}\n```");
            s
        }
    }
}

/// A trained single-method model as stored by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub method: ExperimentMethod,
    pub features: FeatureConfig,
    pub backend: Backend,
}

impl ModelBundle {
    /// Trains on the training partition of `records`.
    pub fn train(
        records: &[UtteranceRecord],
        method: ExperimentMethod,
        features: &FeatureConfig,
        svm: &SvmParams,
        plda: &PldaOptions,
    ) -> Result<(Self, Vec<String>)> {
        let train: Vec<&UtteranceRecord> = records.iter().filter(|r| is_training(r)).collect();
        if train.is_empty() {
            return Err(Error::param("manifest has no training records"));
        }
        let fm = method.feature_method();
        let x: Vec<Vec<f64>> = train
            .par_iter()
            .map(|r| {
                let clip = load(r)?;
                embed(&clip, fm, features).map_err(|e| stage_error(fm.as_str(), "none", r, e))
            })
            .collect::<Result<_>>()?;
        let labels: Vec<String> = train.iter().map(|r| r.speaker_id.clone()).collect();
        let mut warnings = Vec::new();
        let backend = train_backend(method, &x, &labels, svm, plda, &mut warnings)?;
        Ok((
            Self {
                method,
                features: features.clone(),
                backend,
            },
            warnings,
        ))
    }

    /// Predicted speaker and the per-speaker scores.
    pub fn identify(&self, clip: &AudioClip) -> Result<(String, Vec<(String, f64)>)> {
        let e = embed(clip, self.method.feature_method(), &self.features)?;
        Ok((self.backend.identify(&e)?, self.backend.scores(&e)?))
    }

    pub fn to_text(&self) -> String {
        let features = serde_json::to_string(&self.features).expect("config serializes");
        let body = match &self.backend {
            Backend::Svm(m) => m.to_text(),
            Backend::Plda(m) => m.to_text(),
        };
        format!("voxid-model,1\nmethod,{}\nfeatures,{features}\n{body}", self.method)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parts = text.splitn(4, '\n');
        let bad = |m: &str| Error::Model(m.to_string());
        if parts.next() != Some("voxid-model,1") {
            return Err(bad("not a model bundle"));
        }
        let method: ExperimentMethod = parts
            .next()
            .and_then(|l| l.strip_prefix("method,"))
            .ok_or_else(|| bad("missing method line"))?
            .parse()
            .map_err(|e: Error| bad(&e.to_string()))?;
        let features: FeatureConfig = parts
            .next()
            .and_then(|l| l.strip_prefix("features,"))
            .ok_or_else(|| bad("missing features line"))
            .and_then(|j| serde_json::from_str(j).map_err(|e| bad(&format!("features: {e}"))))?;
        let body = parts.next().unwrap_or("");
        let backend = match method {
            ExperimentMethod::Plda => Backend::Plda(PldaModel::from_text(body)?),
            _ => Backend::Svm(SvmModel::from_text(body)?),
        };
        Ok(Self {
            method,
            features,
            backend,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
