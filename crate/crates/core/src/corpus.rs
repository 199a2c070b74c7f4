//! Deterministic source-filter corpus with the layout of the Emirati
//! emotional corpus: speakers × 8 sentences × 9 repetitions, training on
//! neutral sentences 1–4 and testing on sentences 5–8 in all six emotions.
//!
//! Each utterance is a Rosenberg glottal pulse train passed through three
//! time-varying formant resonators. A speaker owns a neutral formant set;
//! sentences are fixed sequences of vowel targets expressed as ratios of
//! that set, so every vowel a speaker produces keeps the speaker's imprint.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{write_manifest, write_wav, AudioClip, Emotion, UtteranceRecord};
use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;
pub const N_SENTENCES: u8 = 8;
pub const N_REPETITIONS: u8 = 9;
pub const TRAIN_SENTENCES: std::ops::RangeInclusive<u8> = 1..=4;
pub const TEST_SENTENCES: std::ops::RangeInclusive<u8> = 5..=8;
pub const MANIFEST_NAME: &str = "manifest.csv";

pub const F0_RANGE: (f64, f64) = (90.0, 250.0);
const MIN_F0_GAP: f64 = 4.0;
const MIN_FORMANT_GAP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub f0_base: f64,
    /// Neutral formant centers, Hz.
    pub formants: [f64; 3],
    pub bandwidths: [f64; 3],
    pub gain: f64,
    /// Open fraction of each glottal cycle.
    pub open_quotient: f64,
    /// One-pole lowpass coefficient applied to the glottal flow; higher
    /// values give a steeper spectral roll-off.
    pub tilt: f64,
    /// Aspiration noise mixed into the excitation, relative to its RMS.
    pub breathiness: f64,
}

impl SpeakerProfile {
    pub fn validate(&self) -> Result<()> {
        if !(F0_RANGE.0..=F0_RANGE.1).contains(&self.f0_base) {
            return Err(Error::param(format!(
                "{}: f0_base {} outside [{}, {}] Hz",
                self.speaker_id, self.f0_base, F0_RANGE.0, F0_RANGE.1
            )));
        }
        let f = self.formants;
        if !(f[0] > 0.0 && f[0] < f[1] && f[1] < f[2]) {
            return Err(Error::param(format!(
                "{}: formants must be strictly increasing",
                self.speaker_id
            )));
        }
        // Vowel targets stretch the neutral set by up to VOWEL_RATIO_MAX.
        if f[2] * VOWEL_RATIO_MAX >= SAMPLE_RATE as f64 / 2.0 {
            return Err(Error::param(format!("{}: formants reach Nyquist", self.speaker_id)));
        }
        if self.bandwidths.iter().any(|b| !(*b > 0.0)) || !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(Error::param(format!(
                "{}: bandwidths and gain must be positive",
                self.speaker_id
            )));
        }
        if !(0.2..=0.8).contains(&self.open_quotient)
            || !(0.0..1.0).contains(&self.tilt)
            || !(0.0..=1.0).contains(&self.breathiness)
        {
            return Err(Error::param(format!("{}: source shape out of range", self.speaker_id)));
        }
        Ok(())
    }

    fn separated_from(&self, other: &SpeakerProfile, f0_gap: f64) -> bool {
        (self.f0_base - other.f0_base).abs() >= f0_gap
            && self
                .formants
                .iter()
                .zip(&other.formants)
                .any(|(a, b)| (a - b).abs() >= MIN_FORMANT_GAP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionModifier {
    pub emotion: Emotion,
    pub f0_scale: f64,
    pub rate_scale: f64,
    /// Peak relative deviation of each glottal period.
    pub jitter: f64,
}

impl EmotionModifier {
    pub fn for_emotion(emotion: Emotion) -> Self {
        let (f0_scale, rate_scale, jitter) = match emotion {
            Emotion::Neutral => (1.0, 1.0, 0.005),
            Emotion::Sad => (0.85, 0.90, 0.01),
            Emotion::Fear => (1.15, 1.20, 0.05),
            Emotion::Happy => (1.20, 1.10, 0.03),
            Emotion::Disgust => (0.95, 0.95, 0.02),
            Emotion::Anger => (1.30, 1.15, 0.04),
        };
        Self {
            emotion,
            f0_scale,
            rate_scale,
            jitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.6..=1.6).contains(&self.f0_scale)
            && (0.6..=1.6).contains(&self.rate_scale)
            && (0.0..=0.1).contains(&self.jitter);
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!(
                "emotion modifier for {} out of range",
                self.emotion
            )))
        }
    }
}

/// Vowel targets as (F1, F2, F3) ratios to the speaker's neutral set.
const VOWELS: [[f64; 3]; 6] = [
    [1.30, 0.85, 1.00], // a
    [0.55, 1.35, 1.06], // i
    [0.60, 0.62, 0.95], // u
    [0.85, 1.18, 1.02], // e
    [0.92, 0.70, 0.97], // o
    [1.00, 1.00, 1.00], // schwa
];
const VOWEL_RATIO_MAX: f64 = 1.35;

/// Vowel sequence and relative segment lengths per sentence.
const SENTENCES: [&[(usize, f64)]; 8] = [
    &[(0, 1.0), (1, 0.8), (2, 1.1), (3, 0.9)],
    &[(4, 1.0), (0, 1.2), (5, 0.7), (1, 1.0), (2, 0.9)],
    &[(1, 0.9), (3, 1.0), (0, 1.1), (4, 0.8), (5, 0.9), (2, 1.0)],
    &[(2, 1.1), (4, 0.9), (3, 1.0), (0, 1.0)],
    &[(3, 0.8), (2, 1.0), (1, 1.1), (5, 0.8), (0, 1.0)],
    &[(5, 0.9), (0, 1.0), (2, 0.8), (4, 1.1), (1, 0.9), (3, 1.0)],
    &[(0, 0.9), (4, 1.1), (1, 1.0), (3, 0.8), (2, 1.2)],
    &[(4, 1.0), (1, 0.9), (5, 1.0), (2, 1.1)],
];

/// Neutral-rate sentence duration before repetition jitter, seconds.
const BASE_DURATION: f64 = 1.45;
const DURATION_RANGE: (f64, f64) = (1.0, 2.0);
/// Fraction of each segment spent gliding from the previous target.
const TRANSITION: f64 = 0.3;
const EDGE_RAMP_SECS: f64 = 0.02;
const NOISE_LEVEL: f64 = 1e-4;
const OUTPUT_PEAK: f64 = 0.5;

/// splitmix64 finalizer; derives independent stream seeds from a master seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, &p| mix(acc ^ mix(p)))
}

fn fmt_speaker_id(index: usize, n_speakers: usize) -> String {
    let width = n_speakers.to_string().len().max(2);
    format!("spk{:0width$}", index + 1)
}

/// Draws `n` pairwise-separated speaker profiles.
///
/// Base pitches are spread over [90, 250] Hz with a minimum gap of 4 Hz;
/// when `n` is too large for that gap to fit, the gap shrinks to the
/// largest value that does.
pub fn speaker_profiles(n: usize, seed: u64) -> Result<Vec<SpeakerProfile>> {
    if n < 2 {
        return Err(Error::param(format!("need at least two speakers, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0xC0]));
    let span = F0_RANGE.1 - F0_RANGE.0;
    let gap = MIN_F0_GAP.min(span / (n - 1) as f64);
    // Sorted uniform offsets in the slack plus a fixed gap per rank.
    let slack = span - gap * (n - 1) as f64;
    let mut offsets: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * slack).collect();
    offsets.sort_by(f64::total_cmp);
    let mut f0s: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(k, o)| F0_RANGE.0 + o + gap * k as f64)
        .collect();
    f0s.shuffle(&mut rng);

    let mut profiles: Vec<SpeakerProfile> = Vec::with_capacity(n);
    for (i, f0_base) in f0s.into_iter().enumerate() {
        let mut attempts = 0;
        let profile = loop {
            let formants = [
                rng.random_range(350.0..850.0),
                rng.random_range(1000.0..2200.0),
                rng.random_range(2300.0..3500.0),
            ];
            let candidate = SpeakerProfile {
                speaker_id: fmt_speaker_id(i, n),
                f0_base,
                formants,
                bandwidths: [
                    rng.random_range(50.0..110.0),
                    rng.random_range(70.0..140.0),
                    rng.random_range(100.0..200.0),
                ],
                gain: rng.random_range(0.6..1.0),
                open_quotient: rng.random_range(0.3..0.7),
                tilt: rng.random_range(0.0..0.9),
                breathiness: rng.random_range(0.05..0.3),
            };
            if profiles.iter().all(|p| candidate.separated_from(p, gap - 1e-9)) {
                break candidate;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::param("could not separate speaker profiles"));
            }
        };
        profiles.push(profile);
    }
    Ok(profiles)
}

/// Two-pole resonator with unity gain at DC.
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn step(&mut self, x: f64, freq: f64, bw: f64, sr: f64) -> f64 {
        let r = (-PI * bw / sr).exp();
        let b = 2.0 * r * (2.0 * PI * freq / sr).cos();
        let c = -r * r;
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Differentiated Rosenberg pulse train, the excitation at the lips.
fn glottal_source(n: usize, f0: f64, jitter: f64, profile: &SpeakerProfile, sr: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut flow = vec![0.0; n + 1];
    let mut t = 0.0_f64;
    while (t as usize) < n {
        let dev = if jitter > 0.0 {
            rng.random_range(-jitter..=jitter)
        } else {
            0.0
        };
        let period = sr / (f0 * (1.0 + dev));
        let open = profile.open_quotient * period;
        let close = 0.4 * open;
        let start = t.ceil() as usize;
        let end = ((t + open + close).ceil() as usize).min(n + 1);
        for (k, v) in flow.iter_mut().enumerate().take(end).skip(start) {
            let u = k as f64 - t;
            *v = if u < open {
                0.5 * (1.0 - (PI * u / open).cos())
            } else {
                (0.5 * PI * (u - open) / close).cos().max(0.0)
            };
        }
        t += period;
    }
    let mut state = 0.0;
    for v in &mut flow {
        state = (1.0 - profile.tilt) * *v + profile.tilt * state;
        *v = state;
    }
    flow.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn synth_utterance(
    profile: &SpeakerProfile,
    sentence_id: u8,
    emotion: Emotion,
    repetition: u8,
    seed: u64,
) -> Result<AudioClip> {
    synth_utterance_with(
        profile,
        sentence_id,
        &EmotionModifier::for_emotion(emotion),
        repetition,
        seed,
    )
}

/// Same as [`synth_utterance`] with an explicit emotion modifier.
pub fn synth_utterance_with(
    profile: &SpeakerProfile,
    sentence_id: u8,
    modifier: &EmotionModifier,
    repetition: u8,
    seed: u64,
) -> Result<AudioClip> {
    profile.validate()?;
    modifier.validate()?;
    if !(1..=N_SENTENCES).contains(&sentence_id) {
        return Err(Error::param(format!("sentence_id {sentence_id} outside 1..=8")));
    }
    if !(1..=N_REPETITIONS).contains(&repetition) {
        return Err(Error::param(format!("repetition {repetition} outside 1..=9")));
    }
    let speaker_hash = profile.speaker_id.bytes().fold(0u64, |h, b| mix(h ^ b as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
        seed,
        speaker_hash,
        sentence_id as u64,
        modifier.emotion as u64,
        repetition as u64,
    ]));
    let sr = SAMPLE_RATE as f64;
    let plan = SENTENCES[(sentence_id - 1) as usize];

    let weights: Vec<f64> = plan
        .iter()
        .map(|(_, w)| w * (1.0 + rng.random_range(-0.08..0.08)))
        .collect();
    let duration = (BASE_DURATION * (1.0 + rng.random_range(-0.05..0.05)) / modifier.rate_scale)
        .clamp(DURATION_RANGE.0, DURATION_RANGE.1);
    let n = (duration * sr).round() as usize;
    let total_w: f64 = weights.iter().sum();
    let mut bounds = Vec::with_capacity(plan.len() + 1);
    bounds.push(0usize);
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        bounds.push(((acc / total_w) * n as f64).round() as usize);
    }

    // Per-sample formant track: hold each target, glide in from the last.
    let mut track = vec![[0.0f64; 3]; n];
    for (seg, (&(vowel, _), win)) in plan.iter().zip(bounds.windows(2)).enumerate() {
        let target = VOWELS[vowel];
        let prev = if seg == 0 { target } else { VOWELS[plan[seg - 1].0] };
        let len = (win[1] - win[0]).max(1);
        let glide = (TRANSITION * len as f64).max(1.0);
        for (k, slot) in track[win[0]..win[1]].iter_mut().enumerate() {
            let a = (k as f64 / glide).min(1.0);
            for j in 0..3 {
                let ratio = prev[j] + (target[j] - prev[j]) * a;
                slot[j] = profile.formants[j] * ratio;
            }
        }
    }

    let f0 = profile.f0_base * modifier.f0_scale;
    let mut source = glottal_source(n, f0, modifier.jitter, profile, sr, &mut rng);
    let rms = (source.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if profile.breathiness > 0.0 && rms > 0.0 {
        let aspiration = Normal::new(0.0, profile.breathiness * rms).expect("valid normal");
        source.iter_mut().for_each(|v| *v += aspiration.sample(&mut rng));
    }
    let noise = Normal::new(0.0, NOISE_LEVEL).expect("valid normal");
    let mut res = [
        Resonator { y1: 0.0, y2: 0.0 },
        Resonator { y1: 0.0, y2: 0.0 },
        Resonator { y1: 0.0, y2: 0.0 },
    ];
    let mut out: Vec<f64> = source
        .iter()
        .zip(&track)
        .map(|(&x, f)| {
            let mut y = x;
            for j in 0..3 {
                y = res[j].step(y, f[j], profile.bandwidths[j], sr);
            }
            y
        })
        .collect();

    let ramp = (EDGE_RAMP_SECS * sr) as usize;
    for k in 0..ramp.min(n / 2) {
        let g = 0.5 * (1.0 - (PI * k as f64 / ramp as f64).cos());
        out[k] *= g;
        out[n - 1 - k] *= g;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let scale = OUTPUT_PEAK * profile.gain / peak;
        out.iter_mut().for_each(|v| *v *= scale);
    }
    for v in &mut out {
        *v += noise.sample(&mut rng);
    }
    AudioClip::new(out, SAMPLE_RATE)
}

pub fn utterance_file_name(speaker_id: &str, sentence_id: u8, emotion: Emotion, repetition: u8) -> String {
    format!("{speaker_id}_sent{sentence_id}_{emotion}_rep{repetition}.wav")
}

/// Every record of the corpus layout in manifest order, with paths relative
/// to the corpus directory. Training records come first.
pub fn plan_corpus(speaker_ids: &[String]) -> Vec<UtteranceRecord> {
    let mut out = Vec::new();
    let mut push = |spk: &String, sentence_id: u8, emotion: Emotion, repetition: u8| {
        out.push(UtteranceRecord {
            path: PathBuf::from(utterance_file_name(spk, sentence_id, emotion, repetition)),
            speaker_id: spk.clone(),
            sentence_id,
            emotion,
            repetition,
        })
    };
    for spk in speaker_ids {
        for s in TRAIN_SENTENCES {
            for r in 1..=N_REPETITIONS {
                push(spk, s, Emotion::Neutral, r);
            }
        }
    }
    for spk in speaker_ids {
        for s in TEST_SENTENCES {
            for e in Emotion::ALL {
                for r in 1..=N_REPETITIONS {
                    push(spk, s, e, r);
                }
            }
        }
    }
    out
}

pub fn is_training(record: &UtteranceRecord) -> bool {
    TRAIN_SENTENCES.contains(&record.sentence_id) && record.emotion == Emotion::Neutral
}

pub fn is_testing(record: &UtteranceRecord) -> bool {
    TEST_SENTENCES.contains(&record.sentence_id)
}

/// Synthesizes the whole corpus into `out_dir` and writes the manifest.
/// Returns the manifest path.
pub fn build_corpus(n_speakers: usize, out_dir: impl AsRef<Path>, seed: u64) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    let profiles = speaker_profiles(n_speakers, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ids: Vec<String> = profiles.iter().map(|p| p.speaker_id.clone()).collect();
    let records = plan_corpus(&ids);
    records.par_iter().try_for_each(|rec| -> Result<()> {
        let idx = ids
            .iter()
            .position(|id| *id == rec.speaker_id)
            .expect("planned speaker");
        let clip = synth_utterance(&profiles[idx], rec.sentence_id, rec.emotion, rec.repetition, seed)?;
        write_wav(&clip, out_dir.join(&rec.path))
    })?;
    let manifest = out_dir.join(MANIFEST_NAME);
    write_manifest(&records, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disguise::estimate_f0;

    fn profile() -> SpeakerProfile {
        SpeakerProfile {
            speaker_id: "spk01".into(),
            f0_base: 140.0,
            formants: [600.0, 1500.0, 2600.0],
            bandwidths: [80.0, 100.0, 150.0],
            gain: 0.8,
            open_quotient: 0.5,
            tilt: 0.5,
            breathiness: 0.1,
        }
    }

    #[test]
    fn deterministic_and_within_duration() {
        let p = profile();
        let a = synth_utterance(&p, 3, Emotion::Fear, 2, 9).unwrap();
        let b = synth_utterance(&p, 3, Emotion::Fear, 2, 9).unwrap();
        assert_eq!(a, b);
        let c = synth_utterance(&p, 3, Emotion::Fear, 3, 9).unwrap();
        assert_ne!(a, c);
        for s in 1..=8 {
            for e in Emotion::ALL {
                let clip = synth_utterance(&p, s, e, 1, 0).unwrap();
                let d = clip.duration_secs();
                assert!((1.0..=2.0).contains(&d), "{s} {e} {d}");
            }
        }
    }

    #[test]
    fn neutral_f0_tracks_profile() {
        for f0 in [95.0, 140.0, 245.0] {
            let p = SpeakerProfile {
                f0_base: f0,
                ..profile()
            };
            let est = estimate_f0(&synth_utterance(&p, 1, Emotion::Neutral, 1, 3).unwrap()).unwrap();
            assert!((est / f0 - 1.0).abs() < 0.05, "{f0} -> {est}");
        }
    }

    #[test]
    fn anger_raises_f0() {
        let p = profile();
        let n = estimate_f0(&synth_utterance(&p, 6, Emotion::Neutral, 4, 1).unwrap()).unwrap();
        let a = estimate_f0(&synth_utterance(&p, 6, Emotion::Anger, 4, 1).unwrap()).unwrap();
        assert!((a / n / 1.3 - 1.0).abs() < 0.05, "{}", a / n);
    }

    #[test]
    fn profiles_are_separated() {
        for n in [2, 10, 41, 50] {
            let ps = speaker_profiles(n, 7).unwrap();
            let gap = MIN_F0_GAP.min((F0_RANGE.1 - F0_RANGE.0) / (n - 1) as f64);
            for (i, a) in ps.iter().enumerate() {
                a.validate().unwrap();
                for b in &ps[i + 1..] {
                    assert!(a.separated_from(b, gap - 1e-9));
                }
            }
        }
        assert_eq!(speaker_profiles(10, 1).unwrap(), speaker_profiles(10, 1).unwrap());
        assert!(speaker_profiles(1, 1).is_err());
    }

    #[test]
    fn plan_counts_and_partitions() {
        let ids: Vec<String> = (0..50).map(|i| fmt_speaker_id(i, 50)).collect();
        let plan = plan_corpus(&ids);
        assert_eq!(plan.len(), 12_600);
        assert_eq!(plan.iter().filter(|r| is_training(r)).count(), 1_800);
        assert_eq!(plan.iter().filter(|r| is_testing(r)).count(), 10_800);
        assert!(plan.iter().all(|r| is_training(r) != is_testing(r)));
        assert_eq!(plan[0].path, PathBuf::from("spk01_sent1_neutral_rep1.wav"));
    }

    #[test]
    fn invalid_inputs() {
        let p = profile();
        assert!(synth_utterance(&p, 9, Emotion::Neutral, 1, 0).is_err());
        assert!(synth_utterance(&p, 1, Emotion::Neutral, 0, 0).is_err());
        let bad = SpeakerProfile {
            formants: [900.0, 800.0, 2500.0],
            ..p.clone()
        };
        assert!(synth_utterance(&bad, 1, Emotion::Neutral, 1, 0).is_err());
        let low = SpeakerProfile { f0_base: 60.0, ..p };
        assert!(synth_utterance(&low, 1, Emotion::Neutral, 1, 0).is_err());
    }

    #[test]
    fn small_build_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_corpus(2, dir.path(), 5).unwrap();
        let records = crate::audio::load_manifest(&manifest).unwrap();
        assert_eq!(records.len(), 2 * 36 + 2 * 216);
        let clip = crate::audio::read_wav(&records[0].path).unwrap();
        assert_eq!(clip.sample_rate, SAMPLE_RATE);
    }
}
