//! MFCC extraction and regression deltas.

use crate::audio::AudioClip;
use crate::dsp::{frame_signal, next_pow2, PowerSpectrum};
use crate::error::{Error, Result};

use super::dct::Dct;
use super::mel::{mel_filterbank, MelFilterbank};
use super::{FeatureConfig, FeatureMatrix, FeatureMethod};

/// Regression window half-width used when none is given.
pub const DEFAULT_DELTA_N: usize = 2;

fn pre_emphasize(samples: &[f64], coeff: f64) -> Vec<f64> {
    if coeff == 0.0 {
        return samples.to_vec();
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut prev = 0.0;
    for &s in samples {
        out.push(s - coeff * prev);
        prev = s;
    }
    out
}

/// Everything needed to turn frames into cepstra; build once per config.
#[derive(Debug)]
pub struct MfccPipeline {
    spectrum: PowerSpectrum,
    filterbank: MelFilterbank,
    dct: Dct,
    log_floor: f64,
}

impl MfccPipeline {
    pub fn new(cfg: &FeatureConfig, frame_len: usize, sample_rate: u32) -> Result<Self> {
        if cfg.n_mfcc == 0 || cfg.n_mfcc > cfg.n_filters {
            return Err(Error::param(format!(
                "n_mfcc {} must be in 1..={}",
                cfg.n_mfcc, cfg.n_filters
            )));
        }
        let n_fft = cfg.n_fft.unwrap_or_else(|| next_pow2(frame_len));
        if n_fft < frame_len {
            return Err(Error::param(format!(
                "n_fft {n_fft} is shorter than the {frame_len}-sample frame"
            )));
        }
        let fmax = cfg.fmax.unwrap_or(f64::from(sample_rate) / 2.0);
        Ok(Self {
            spectrum: PowerSpectrum::new(n_fft)?,
            filterbank: mel_filterbank(cfg.n_filters, n_fft, sample_rate, cfg.fmin, fmax)?,
            dct: Dct::new(cfg.n_filters, cfg.n_mfcc)?,
            log_floor: cfg.log_floor,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    pub fn frame_cepstrum(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let power = self.spectrum.compute(frame)?;
        let log_energies: Vec<f64> = self
            .filterbank
            .apply(&power)
            .into_iter()
            .map(|e| e.max(self.log_floor).ln())
            .collect();
        Ok(self.dct.forward(&log_energies))
    }
}

/// Static cepstra: pre-emphasis, framing, power spectrum, mel energies,
/// log with floor, orthonormal DCT-II.
pub fn mfcc_static(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let emphasized = AudioClip {
        samples: pre_emphasize(&clip.samples, cfg.pre_emphasis),
        sample_rate: clip.sample_rate,
    };
    let frames = frame_signal(&emphasized, cfg.frame_ms, cfg.hop_ms, cfg.window)?;
    let pipeline = MfccPipeline::new(cfg, frames.geometry.frame_len, clip.sample_rate)?;
    let vectors = frames
        .frames
        .iter()
        .map(|f| pipeline.frame_cepstrum(f))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(vectors, FeatureMethod::MfccStatic, cfg.n_mfcc, frames.geometry)
}

/// Regression deltas d_t = Σ n(c_{t+n} − c_{t−n}) / (2 Σ n²), with frame
/// indices clamped to the sequence (edge replication).
pub fn delta(coeffs: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    if n < 1 {
        return Err(Error::param("delta window N must be at least 1"));
    }
    if coeffs.is_empty() {
        return Err(Error::param("delta needs at least one frame"));
    }
    let dim = coeffs[0].len();
    let last = coeffs.len() - 1;
    let denom = 2.0 * (1..=n).map(|k| (k * k) as f64).sum::<f64>();
    Ok((0..coeffs.len())
        .map(|t| {
            let mut d = vec![0.0; dim];
            for k in 1..=n {
                let ahead = &coeffs[(t + k).min(last)];
                let behind = &coeffs[t.saturating_sub(k)];
                for j in 0..dim {
                    d[j] += k as f64 * (ahead[j] - behind[j]);
                }
            }
            d.iter_mut().for_each(|v| *v /= denom);
            d
        })
        .collect())
}

/// Per frame: [static ‖ Δ ‖ Δ²].
pub fn mfcc_delta_delta(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let statics = mfcc_static(clip, cfg)?;
    let d1 = delta(&statics.vectors, cfg.delta_n)?;
    let d2 = delta(&d1, cfg.delta_n)?;
    let vectors = statics
        .vectors
        .iter()
        .zip(d1.iter().zip(&d2))
        .map(|(s, (a, b))| s.iter().chain(a).chain(b).copied().collect())
        .collect();
    FeatureMatrix::new(vectors, FeatureMethod::MfccDeltaDelta, 3 * cfg.n_mfcc, statics.geometry)
}
