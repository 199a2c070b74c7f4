//! Shared signal primitives: framing, windows, power spectra and
//! autocorrelation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_MS: f64 = 25.0;
pub const DEFAULT_HOP_MS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Hamming,
    Rectangular,
}

impl Window {
    pub fn weights(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hamming if len == 1 => vec![1.0],
            Window::Hamming => {
                let denom = (len - 1) as f64;
                (0..len)
                    .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
                    .collect()
            }
        }
    }
}

/// Frame geometry shared by every feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl FrameGeometry {
    pub fn frame_ms(&self) -> f64 {
        self.frame_len as f64 * 1000.0 / f64::from(self.sample_rate)
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop as f64 * 1000.0 / f64::from(self.sample_rate)
    }
}

/// Overlapping, windowed frames cut from a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Vec<Vec<f64>>,
    pub geometry: FrameGeometry,
}

impl FrameMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * f64::from(sample_rate) / 1000.0).round() as usize
}

/// Number of full frames that fit in `signal_len` samples.
pub fn frame_count(signal_len: usize, frame_len: usize, hop: usize) -> usize {
    if signal_len < frame_len {
        0
    } else {
        (signal_len - frame_len) / hop + 1
    }
}

/// Cuts `samples` into frames of `frame_len` every `hop` samples.
pub fn frame_samples(
    samples: &[f64],
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    window: Window,
) -> Result<FrameMatrix> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::param("frame length and hop must be positive"));
    }
    if hop > frame_len {
        return Err(Error::param("hop must not exceed the frame length"));
    }
    if samples.len() < frame_len {
        return Err(Error::TooShort {
            needed: frame_len,
            got: samples.len(),
        });
    }
    let weights = window.weights(frame_len);
    let frames = (0..frame_count(samples.len(), frame_len, hop))
        .map(|i| {
            samples[i * hop..i * hop + frame_len]
                .iter()
                .zip(&weights)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(FrameMatrix {
        frames,
        geometry: FrameGeometry {
            frame_len,
            hop,
            sample_rate,
        },
    })
}

pub fn frame_signal(clip: &AudioClip, frame_ms: f64, hop_ms: f64, window: Window) -> Result<FrameMatrix> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(Error::param(format!(
            "need frame_ms >= hop_ms > 0, got {frame_ms} / {hop_ms}"
        )));
    }
    let frame_len = ms_to_samples(frame_ms, clip.sample_rate);
    let hop = ms_to_samples(hop_ms, clip.sample_rate).max(1);
    frame_samples(&clip.samples, clip.sample_rate, frame_len, hop, window)
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Reusable |FFT|² evaluator for a fixed transform size.
pub struct PowerSpectrum {
    n_fft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PowerSpectrum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PowerSpectrum").field("n_fft", &self.n_fft).finish()
    }
}

impl PowerSpectrum {
    pub fn new(n_fft: usize) -> Result<Self> {
        if n_fft == 0 || !n_fft.is_power_of_two() {
            return Err(Error::param(format!("n_fft {n_fft} is not a power of two")));
        }
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(Self { n_fft, fft })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Complex spectrum of the zero-padded frame (all `n_fft` bins).
    pub fn spectrum(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        if frame.len() > self.n_fft {
            return Err(Error::param(format!(
                "frame of {} samples exceeds n_fft {}",
                frame.len(),
                self.n_fft
            )));
        }
        let mut buf: Vec<Complex64> = frame.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.n_fft, Complex64::new(0.0, 0.0));
        self.fft.process(&mut buf);
        Ok(buf)
    }

    pub fn compute(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let spec = self.spectrum(frame)?;
        Ok(spec[..self.n_bins()].iter().map(|c| c.norm_sqr()).collect())
    }
}

/// One-sided power spectrum |FFT_k|², k = 0..=n_fft/2.
pub fn power_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>> {
    PowerSpectrum::new(n_fft)?.compute(frame)
}

/// Biased autocorrelation r(τ) = Σ s(n)·s(n+τ) for τ = 0..=max_lag.
pub fn autocorrelation(frame: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= frame.len() {
        return Err(Error::param(format!(
            "max_lag {max_lag} must be below the frame length {}",
            frame.len()
        )));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            frame[..frame.len() - lag]
                .iter()
                .zip(&frame[lag..])
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
