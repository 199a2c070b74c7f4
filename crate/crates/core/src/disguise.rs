//! Voice disguise effects: pitch raising/lowering and ring-modulated
//! "electronic" voice, plus an autocorrelation f0 estimator used to check
//! them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

pub const DEFAULT_HIGH_SEMITONES: f64 = 4.0;
pub const DEFAULT_LOW_SEMITONES: f64 = -4.0;
pub const DEFAULT_CARRIER_HZ: f64 = 50.0;

const MIN_CLIP_SECS: f64 = 0.1;
const GRAIN_MS: f64 = 40.0;
const SEEK_MS: f64 = 5.0;
const SINC_ZERO_CROSSINGS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    None,
    HighPitched,
    LowPitched,
    Evc,
}

impl Effect {
    pub const ALL: [Effect; 4] = [Effect::None, Effect::HighPitched, Effect::LowPitched, Effect::Evc];

    pub fn as_str(self) -> &'static str {
        match self {
            Effect::None => "none",
            Effect::HighPitched => "high_pitched",
            Effect::LowPitched => "low_pitched",
            Effect::Evc => "evc",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Effect::None => "No disguise",
            Effect::HighPitched => "High-pitched",
            Effect::LowPitched => "Low-pitched",
            Effect::Evc => "Electronic Voice Conversion (EVC)",
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Effect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "clean" => Ok(Effect::None),
            "high" | "high_pitched" => Ok(Effect::HighPitched),
            "low" | "low_pitched" => Ok(Effect::LowPitched),
            "evc" => Ok(Effect::Evc),
            other => Err(Error::param(format!("unknown effect '{other}'"))),
        }
    }
}

/// Effect plus its magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisguiseSpec {
    pub effect: Effect,
    pub semitones: f64,
    pub carrier_hz: f64,
}

impl DisguiseSpec {
    pub fn none() -> Self {
        Self {
            effect: Effect::None,
            semitones: 0.0,
            carrier_hz: DEFAULT_CARRIER_HZ,
        }
    }

    /// Default magnitude for `effect`.
    pub fn default_for(effect: Effect) -> Self {
        let semitones = match effect {
            Effect::HighPitched => DEFAULT_HIGH_SEMITONES,
            Effect::LowPitched => DEFAULT_LOW_SEMITONES,
            _ => 0.0,
        };
        Self {
            effect,
            semitones,
            carrier_hz: DEFAULT_CARRIER_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.effect {
            Effect::HighPitched if !(self.semitones > 0.0) => {
                Err(Error::param("high-pitched disguise needs a positive semitone shift"))
            }
            Effect::LowPitched if !(self.semitones < 0.0) => {
                Err(Error::param("low-pitched disguise needs a negative semitone shift"))
            }
            Effect::HighPitched | Effect::LowPitched if self.semitones.abs() > 12.0 => {
                Err(Error::param("pitch shift is limited to ±12 semitones"))
            }
            Effect::Evc if !(self.carrier_hz > 10.0 && self.carrier_hz < 500.0) => Err(Error::param(format!(
                "carrier {} Hz outside (10, 500)",
                self.carrier_hz
            ))),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, clip: &AudioClip) -> Result<AudioClip> {
        self.validate()?;
        match self.effect {
            Effect::None => Ok(clip.clone()),
            Effect::HighPitched | Effect::LowPitched => pitch_shift(clip, self.semitones),
            Effect::Evc => evc_transform(clip, self.carrier_hz),
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Reads the signal at fractional positions `t_j = j·step` with a
/// Hann-windowed sinc, lowpassed to `min(1, 1/step)` of Nyquist.
fn resample(x: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let cutoff = (1.0 / step).min(1.0);
    let half = (SINC_ZERO_CROSSINGS as f64 / cutoff).ceil() as isize;
    (0..out_len)
        .map(|j| {
            let t = j as f64 * step;
            let center = t.floor() as isize;
            let mut acc = 0.0;
            for i in (center - half + 1)..=(center + half) {
                if i < 0 || i as usize >= x.len() {
                    continue;
                }
                let d = t - i as f64;
                let w = 0.5 + 0.5 * (PI * d / half as f64).cos();
                acc += x[i as usize] * cutoff * sinc(cutoff * d) * w;
            }
            acc
        })
        .collect()
}

/// Waveform-similarity overlap-add: Hann grains at a fixed 50% synthesis
/// hop, each grain's read position nudged within ±`seek` samples to best
/// continue the previous one. Produces exactly `out_len` samples.
fn wsola(x: &[f64], out_len: usize, grain: usize, seek: usize) -> Vec<f64> {
    let hop = grain / 2;
    let ratio = x.len() as f64 / out_len as f64;
    let window: Vec<f64> = (0..grain)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / grain as f64).cos())
        .collect();
    let at = |i: isize| -> f64 {
        if i >= 0 && (i as usize) < x.len() {
            x[i as usize]
        } else {
            0.0
        }
    };

    let mut out = vec![0.0; out_len + grain];
    let mut norm = vec![0.0; out_len + grain];
    let mut prev: Option<isize> = None;
    let n_grains = out_len / hop + 1;
    for k in 0..n_grains {
        let nominal = (k as f64 * hop as f64 * ratio).round() as isize;
        let pos = match prev {
            None => nominal,
            Some(p) => {
                // Natural continuation of the previous grain's second half.
                let target: Vec<f64> = (0..hop as isize).map(|n| at(p + hop as isize + n)).collect();
                let target_energy: f64 = target.iter().map(|v| v * v).sum();
                if target_energy <= 0.0 {
                    nominal
                } else {
                    let mut best = nominal;
                    let mut best_score = f64::NEG_INFINITY;
                    for delta in -(seek as isize)..=(seek as isize) {
                        let start = nominal + delta;
                        let (mut dot, mut e) = (0.0, 0.0);
                        for (n, t) in target.iter().enumerate() {
                            let v = at(start + n as isize);
                            dot += t * v;
                            e += v * v;
                        }
                        let score = if e > 0.0 { dot / e.sqrt() } else { f64::NEG_INFINITY };
                        if score > best_score {
                            best_score = score;
                            best = start;
                        }
                    }
                    best
                }
            }
        };
        let out_start = k * hop;
        for n in 0..grain {
            out[out_start + n] += window[n] * at(pos + n as isize);
            norm[out_start + n] += window[n];
        }
        prev = Some(pos);
    }
    out.truncate(out_len);
    out.iter()
        .zip(&norm)
        .map(|(v, w)| if *w > 1e-9 { v / w } else { 0.0 })
        .collect()
}

/// Shifts pitch by resampling with factor 2^(s/12) and time-stretching
/// back to the original duration. Formants move with the pitch.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip> {
    if !(semitones.abs() <= 12.0) {
        return Err(Error::param(format!("pitch shift {semitones} outside ±12 semitones")));
    }
    let sr = f64::from(clip.sample_rate);
    let grain = ((GRAIN_MS * sr / 1000.0).round() as usize).max(4) & !1;
    let needed = ((MIN_CLIP_SECS * sr).ceil() as usize).max(grain);
    if clip.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: clip.len(),
        });
    }
    let factor = 2f64.powf(semitones / 12.0);
    let n = clip.len();
    let squeezed = if semitones == 0.0 {
        clip.samples.clone()
    } else {
        let m = ((n as f64 / factor).round() as usize).max(1);
        resample(&clip.samples, factor, m)
    };
    let seek = (SEEK_MS * sr / 1000.0).round() as usize;
    let samples = wsola(&squeezed, n, grain, seek)
        .into_iter()
        .map(|v| v.clamp(-1.0, 1.0))
        .collect();
    AudioClip::new(samples, clip.sample_rate)
}

/// Ring modulation y(t) = x(t)·sin(2π f_c t), rescaled to the input peak.
pub fn evc_transform(clip: &AudioClip, carrier_hz: f64) -> Result<AudioClip> {
    if !(carrier_hz > 10.0 && carrier_hz < 500.0) {
        return Err(Error::param(format!("carrier {carrier_hz} Hz outside (10, 500)")));
    }
    let sr = f64::from(clip.sample_rate);
    let mut samples: Vec<f64> = clip
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| x * (2.0 * PI * carrier_hz * i as f64 / sr).sin())
        .collect();
    let peak_in = clip.peak();
    let peak_out = samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak_out > 0.0 {
        let g = peak_in / peak_out;
        samples.iter_mut().for_each(|s| *s = (*s * g).clamp(-1.0, 1.0));
    }
    AudioClip::new(samples, clip.sample_rate)
}

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 500.0;
const VOICING_THRESHOLD: f64 = 0.3;

/// Normalized autocorrelation at `lag`.
fn nacf(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let (mut dot, mut e0, mut e1) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (x[i], x[i + lag]);
        dot += a * b;
        e0 += a * a;
        e1 += b * b;
    }
    if e0 > 0.0 && e1 > 0.0 {
        dot / (e0 * e1).sqrt()
    } else {
        0.0
    }
}

/// Fundamental frequency from the normalized autocorrelation peak over
/// lags covering 60–500 Hz.
pub fn estimate_f0(clip: &AudioClip) -> Result<f64> {
    let sr = f64::from(clip.sample_rate);
    let needed = (MIN_CLIP_SECS * sr).ceil() as usize;
    if clip.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: clip.len(),
        });
    }
    let lag_min = ((sr / F0_MAX_HZ).floor() as usize).max(2);
    let lag_max = (sr / F0_MIN_HZ).ceil() as usize;
    if lag_max + 2 >= clip.len() {
        return Err(Error::TooShort {
            needed: lag_max + 2,
            got: clip.len(),
        });
    }
    let x = &clip.samples;
    let lo = lag_min - 1;
    let values: Vec<f64> = (lo..=lag_max + 1).map(|lag| nacf(x, lag)).collect();
    let at = |lag: usize| values[lag - lo];

    let peaks: Vec<usize> = (lag_min..=lag_max)
        .filter(|&l| at(l) >= at(l - 1) && at(l) >= at(l + 1))
        .collect();
    let best = peaks.iter().map(|&l| at(l)).fold(f64::NEG_INFINITY, f64::max);
    if peaks.is_empty() || best < VOICING_THRESHOLD {
        return Err(Error::Unvoiced { best: best.max(0.0) });
    }
    // The shortest lag close to the best peak avoids locking onto a multiple
    // of the true period.
    let lag = peaks
        .into_iter()
        .find(|&l| at(l) >= 0.9 * best)
        .expect("best peak satisfies its own threshold");
    let (y0, y1, y2) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(sr / (lag as f64 + offset))
}
