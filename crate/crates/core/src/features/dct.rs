//! Orthonormal DCT-II, used both inside MFCC and as a standalone
//! time-domain compression feature.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::audio::AudioClip;
use crate::dsp::frame_signal;
use crate::error::{Error, Result};

use super::{FeatureConfig, FeatureMatrix, FeatureMethod};

/// Precomputed basis for the first `n_coeffs` DCT-II outputs of length-`n`
/// inputs: X(m) = sqrt(2/N) · C_m · Σ x(n) cos((2n+1)mπ / 2N), with
/// C_0 = 1/√2 and C_m = 1 otherwise.
#[derive(Debug, Clone)]
pub struct Dct {
    len: usize,
    basis: Vec<Vec<f64>>,
}

impl Dct {
    pub fn new(len: usize, n_coeffs: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("DCT length must be positive"));
        }
        if n_coeffs > len {
            return Err(Error::param(format!(
                "{n_coeffs} DCT coefficients requested from {len}-sample frames"
            )));
        }
        let scale = (2.0 / len as f64).sqrt();
        let basis = (0..n_coeffs)
            .map(|m| {
                let c = if m == 0 { FRAC_1_SQRT_2 } else { 1.0 };
                (0..len)
                    .map(|n| scale * c * ((2 * n + 1) as f64 * m as f64 * PI / (2 * len) as f64).cos())
                    .collect()
            })
            .collect();
        Ok(Self { len, basis })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_coeffs(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.len);
        self.basis
            .iter()
            .map(|row| row.iter().zip(x).map(|(b, v)| b * v).sum())
            .collect()
    }
}

/// Full-length orthonormal DCT-II.
pub fn dct_ii(x: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct::new(x.len(), x.len())?.forward(x))
}

/// Per-frame DCT of the windowed time-domain signal.
pub fn dct_features(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let frames = frame_signal(clip, cfg.frame_ms, cfg.hop_ms, cfg.window)?;
    let dct = Dct::new(frames.geometry.frame_len, cfg.dct_coeffs)?;
    let vectors = frames.frames.iter().map(|f| dct.forward(f)).collect();
    FeatureMatrix::new(vectors, FeatureMethod::Dct, cfg.dct_coeffs, frames.geometry)
}
