//! Mel scale conversion and triangular filterbanks.

use crate::error::{Error, Result};

/// f_mel = 2595 · log10(1 + f/700).
pub fn hz_to_mel(hz: f64) -> Result<f64> {
    if !(hz >= 0.0) {
        return Err(Error::Domain(format!("frequency {hz} Hz is negative")));
    }
    Ok(2595.0 * (hz / 700.0).ln_1p() / std::f64::consts::LN_10)
}

pub fn mel_to_hz(mel: f64) -> Result<f64> {
    if !(mel >= 0.0) {
        return Err(Error::Domain(format!("mel value {mel} is negative")));
    }
    Ok(700.0 * (mel / 2595.0 * std::f64::consts::LN_10).exp_m1())
}

/// Triangular filters on the one-sided power-spectrum bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_filters` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
    /// The `n_filters + 2` band edges, equally spaced in mel.
    pub edges_hz: Vec<f64>,
    pub n_fft: usize,
    pub sample_rate: u32,
}

impl MelFilterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    /// Filter energies of a one-sided power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(n_filters: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Result<MelFilterbank> {
    if n_filters == 0 {
        return Err(Error::param("need at least one mel filter"));
    }
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(Error::param(format!("n_fft {n_fft} is not a power of two")));
    }
    let nyquist = f64::from(sample_rate) / 2.0;
    if fmax > nyquist {
        return Err(Error::param(format!(
            "fmax {fmax} Hz exceeds the Nyquist frequency {nyquist} Hz"
        )));
    }
    if !(fmin >= 0.0 && fmin < fmax) {
        return Err(Error::param(format!("need 0 <= fmin < fmax, got {fmin}, {fmax}")));
    }

    let mel_lo = hz_to_mel(fmin)?;
    let mel_hi = hz_to_mel(fmax)?;
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let edges_hz = (0..n_filters + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect::<Result<Vec<_>>>()?;

    let n_bins = n_fft / 2 + 1;
    let bins: Vec<usize> = edges_hz
        .iter()
        .map(|&f| (((n_fft + 1) as f64 * f / f64::from(sample_rate)).floor() as usize).min(n_bins - 1))
        .collect();

    let mut weights = Vec::with_capacity(n_filters);
    for i in 0..n_filters {
        let (lo, mid, hi) = (bins[i], bins[i + 1], bins[i + 2]);
        if lo == mid || mid == hi {
            return Err(Error::FilterConstruction {
                index: i,
                message: format!("edges share an FFT bin ({lo}, {mid}, {hi}); use a larger n_fft or fewer filters"),
            });
        }
        let mut row = vec![0.0; n_bins];
        for (k, w) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *w = if k <= mid {
                (k - lo) as f64 / (mid - lo) as f64
            } else {
                (hi - k) as f64 / (hi - mid) as f64
            };
        }
        weights.push(row);
    }

    Ok(MelFilterbank {
        weights,
        centers_hz: edges_hz[1..=n_filters].to_vec(),
        edges_hz,
        n_fft,
        sample_rate,
    })
}
