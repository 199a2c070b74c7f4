//! Linear prediction by the autocorrelation method.
//!
//! Coefficients follow the all-pole convention ŝ_n = −Σ a_k s_{n−k}, i.e.
//! the polynomial A(z) = 1 + Σ a_k z^{-k}.

use crate::audio::AudioClip;
use crate::dsp::{autocorrelation, frame_signal};
use crate::error::{Error, Result};

use super::{FeatureConfig, FeatureMatrix, FeatureMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct LpcSolution {
    /// a_1..a_p.
    pub coeffs: Vec<f64>,
    pub reflection: Vec<f64>,
    /// Final prediction error power.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpcFailure {
    ZeroEnergy,
    /// Reflection coefficient at this (1-based) order reached magnitude 1.
    Unstable {
        order: usize,
    },
}

/// Solves the Toeplitz normal equations Σ_j a_j r(|i−j|) = −r(i),
/// i = 1..=p, given r(0..=p).
pub fn levinson_durbin(r: &[f64]) -> std::result::Result<LpcSolution, LpcFailure> {
    let order = r.len().saturating_sub(1);
    if r.is_empty() || !(r[0] > 0.0) {
        return Err(LpcFailure::ZeroEnergy);
    }
    let mut a = vec![0.0; order];
    let mut scratch = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut err = r[0];
    for i in 0..order {
        let acc = r[i + 1] + (0..i).map(|j| a[j] * r[i - j]).sum::<f64>();
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(LpcFailure::Unstable { order: i + 1 });
        }
        scratch[..i].copy_from_slice(&a[..i]);
        for j in 0..i {
            a[j] = scratch[j] + k * scratch[i - 1 - j];
        }
        a[i] = k;
        reflection.push(k);
        err *= 1.0 - k * k;
    }
    Ok(LpcSolution {
        coeffs: a,
        reflection,
        error: err,
    })
}

/// Order-`p` predictor for a single (already windowed) frame.
pub fn lpc_coefficients(frame: &[f64], p: usize) -> Result<std::result::Result<LpcSolution, LpcFailure>> {
    if p < 1 {
        return Err(Error::param("LPC order must be at least 1"));
    }
    if frame.len() <= p {
        return Err(Error::param(format!(
            "frame of {} samples too short for order {p}",
            frame.len()
        )));
    }
    let r = autocorrelation(frame, p)?;
    Ok(levinson_durbin(&r))
}

/// Per-frame a_1..a_p. Frames whose recursion fails emit zeros and are
/// counted in `flagged_frames`.
pub fn lpc_features(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let p = cfg.lpc_order;
    let frames = frame_signal(clip, cfg.frame_ms, cfg.hop_ms, cfg.window)?;
    let mut flagged = 0;
    let mut vectors = Vec::with_capacity(frames.n_frames());
    for frame in &frames.frames {
        match lpc_coefficients(frame, p)? {
            Ok(sol) => vectors.push(sol.coeffs),
            Err(_) => {
                flagged += 1;
                vectors.push(vec![0.0; p]);
            }
        }
    }
    let mut out = FeatureMatrix::new(vectors, FeatureMethod::Lpc, p, frames.geometry)?;
    out.flagged_frames = flagged;
    Ok(out)
}
