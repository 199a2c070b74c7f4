//! Frame-level feature extractors.
//!
//! Every extractor maps an [`AudioClip`] to a [`FeatureMatrix`] of one
//! vector per analysis frame.

pub mod dct;
pub mod lpc;
pub mod mel;
pub mod mfcc;
pub mod wavelet;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::{FrameGeometry, Window, DEFAULT_FRAME_MS, DEFAULT_HOP_MS};
use crate::error::{Error, Result};

pub use dct::{dct_features, dct_ii, Dct};
pub use lpc::{levinson_durbin, lpc_coefficients, lpc_features, LpcFailure, LpcSolution};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use mfcc::{delta, mfcc_delta_delta, mfcc_static};
pub use wavelet::{dwpd_features, dwt_step, wpd_decompose, DwtOutput, Wavelet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMethod {
    MfccStatic,
    MfccDeltaDelta,
    Lpc,
    Dwpd,
    Dct,
}

impl FeatureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMethod::MfccStatic => "mfcc",
            FeatureMethod::MfccDeltaDelta => "mfcc_dd",
            FeatureMethod::Lpc => "lpc",
            FeatureMethod::Dwpd => "dwpd",
            FeatureMethod::Dct => "dct",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mfcc" => Ok(FeatureMethod::MfccStatic),
            "mfcc_dd" => Ok(FeatureMethod::MfccDeltaDelta),
            "lpc" => Ok(FeatureMethod::Lpc),
            "dwpd" => Ok(FeatureMethod::Dwpd),
            "dct" => Ok(FeatureMethod::Dct),
            other => Err(Error::param(format!("unknown feature method '{other}'"))),
        }
    }
}

/// Parameters shared by all extractors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub window: Window,
    /// Applied before MFCC framing only.
    pub pre_emphasis: f64,
    pub n_filters: usize,
    pub n_mfcc: usize,
    /// Defaults to the next power of two at or above the frame length.
    pub n_fft: Option<usize>,
    pub fmin: f64,
    /// Defaults to the Nyquist frequency.
    pub fmax: Option<f64>,
    pub log_floor: f64,
    pub delta_n: usize,
    pub lpc_order: usize,
    pub dwpd_depth: usize,
    pub wavelet: Wavelet,
    pub dct_coeffs: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_ms: DEFAULT_FRAME_MS,
            hop_ms: DEFAULT_HOP_MS,
            window: Window::Hamming,
            pre_emphasis: 0.97,
            n_filters: 26,
            n_mfcc: 13,
            n_fft: None,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
            delta_n: mfcc::DEFAULT_DELTA_N,
            lpc_order: 12,
            dwpd_depth: 3,
            wavelet: Wavelet::Db4,
            dct_coeffs: 13,
        }
    }
}

/// Per-frame feature vectors plus the settings that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub vectors: Vec<Vec<f64>>,
    pub method: FeatureMethod,
    pub dim: usize,
    pub geometry: FrameGeometry,
    /// Frames whose extractor fell back to a zero vector.
    pub flagged_frames: usize,
}

impl FeatureMatrix {
    pub fn new(vectors: Vec<Vec<f64>>, method: FeatureMethod, dim: usize, geometry: FrameGeometry) -> Result<Self> {
        for (row, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::param(format!(
                    "frame {row} has {} values, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data { row });
            }
        }
        Ok(Self {
            vectors,
            method,
            dim,
            geometry,
            flagged_frames: 0,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.vectors.len()
    }

    /// CSV dump: a `# method,dim,frame_ms,hop_ms,sample_rate` comment line,
    /// then one row per frame.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# {},{},{},{},{}\n",
            self.method,
            self.dim,
            self.geometry.frame_ms(),
            self.geometry.hop_ms(),
            self.geometry.sample_rate
        );
        for v in &self.vectors {
            let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty feature dump".into(),
        })?;
        let fields: Vec<&str> = header
            .strip_prefix('#')
            .ok_or(Error::Parse {
                line: 1,
                message: "missing '#' header".into(),
            })?
            .trim()
            .split(',')
            .collect();
        let bad = |message: String| Error::Parse { line: 1, message };
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 header fields, got {}", fields.len())));
        }
        let method: FeatureMethod = fields[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let dim: usize = fields[1].parse().map_err(|_| bad("bad dim".into()))?;
        let frame_ms: f64 = fields[2].parse().map_err(|_| bad("bad frame_ms".into()))?;
        let hop_ms: f64 = fields[3].parse().map_err(|_| bad("bad hop_ms".into()))?;
        let sample_rate: u32 = fields[4].parse().map_err(|_| bad("bad sample_rate".into()))?;
        let mut vectors = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i as u64 + 1,
                    message: e.to_string(),
                })?;
            vectors.push(row);
        }
        let geometry = FrameGeometry {
            frame_len: crate::dsp::ms_to_samples(frame_ms, sample_rate),
            hop: crate::dsp::ms_to_samples(hop_ms, sample_rate),
            sample_rate,
        };
        Self::new(vectors, method, dim, geometry)
    }
}

/// Runs the named extractor.
pub fn extract(clip: &AudioClip, method: FeatureMethod, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    match method {
        FeatureMethod::MfccStatic => mfcc_static(clip, cfg),
        FeatureMethod::MfccDeltaDelta => mfcc_delta_delta(clip, cfg),
        FeatureMethod::Lpc => lpc_features(clip, cfg),
        FeatureMethod::Dwpd => dwpd_features(clip, cfg),
        FeatureMethod::Dct => dct_features(clip, cfg),
    }
}
