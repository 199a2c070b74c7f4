//! PCM WAV input/output and corpus manifests.
//!
//! Only 16-bit integer PCM is accepted. Stereo input is averaged down to
//! mono on read; writes are always mono. No resampling happens here.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

/// A mono audio signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::param("sample rate must be positive"));
        }
        if let Some(row) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Data { row });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::Format(msg.to_string()),
        hound::Error::Unsupported => Error::Unsupported("non-PCM or unknown format tag".into()),
        hound::Error::TooWide => Error::Unsupported("sample width above 16 bits".into()),
        hound::Error::InvalidSampleFormat => Error::Unsupported("invalid sample format".into()),
        hound::Error::UnfinishedSample => Error::Format("truncated sample data".into()),
    }
}

/// Reads a 16-bit PCM WAV file (mono or stereo) into a mono clip.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Unsupported("floating-point samples".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Unsupported(format!("{}-bit samples", spec.bits_per_sample)));
    }
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(Error::Unsupported(format!("{channels} channels")));
    }
    let raw = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<i16>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if raw.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let samples = raw
        .chunks(channels)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| f64::from(s) / PCM16_SCALE).sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, spec.sample_rate)
}

fn quantize(sample: f64) -> i16 {
    let clamped = sample.clamp(-1.0, (PCM16_SCALE - 1.0) / PCM16_SCALE);
    (clamped * PCM16_SCALE).round() as i16
}

/// Writes a clip as 16-bit mono PCM, clamping to [-1, 1).
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(row) = clip.samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::Data { row });
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    {
        let mut w = writer.get_i16_writer(clip.samples.len() as u32);
        for &s in &clip.samples {
            w.write_sample(quantize(s));
        }
        w.flush().map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// The six talking conditions of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Sad,
    Fear,
    Happy,
    Disgust,
    Anger,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Neutral,
        Emotion::Sad,
        Emotion::Fear,
        Emotion::Happy,
        Emotion::Disgust,
        Emotion::Anger,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Sad => "sad",
            Emotion::Fear => "fear",
            Emotion::Happy => "happy",
            Emotion::Disgust => "disgust",
            Emotion::Anger => "anger",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown emotion '{s}'")))
    }
}

/// One manifest row binding an audio file to its labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub path: PathBuf,
    pub speaker_id: String,
    pub sentence_id: u8,
    pub emotion: Emotion,
    pub repetition: u8,
}

impl UtteranceRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(1..=8).contains(&self.sentence_id) {
            return Err(format!("sentence_id {} outside 1..=8", self.sentence_id));
        }
        if !(1..=9).contains(&self.repetition) {
            return Err(format!("repetition {} outside 1..=9", self.repetition));
        }
        if self.speaker_id.is_empty() {
            return Err("empty speaker_id".into());
        }
        Ok(())
    }

    /// Stable identifier used in diagnostics.
    pub fn label(&self) -> String {
        self.path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.path.display().to_string())
    }
}

pub const MANIFEST_HEADER: [&str; 5] = ["path", "speaker_id", "sentence_id", "emotion", "repetition"];

#[derive(Deserialize)]
struct RawRecord {
    path: String,
    speaker_id: String,
    sentence_id: String,
    emotion: String,
    repetition: String,
}

fn parse_row(raw: RawRecord) -> std::result::Result<UtteranceRecord, String> {
    let sentence_id = raw
        .sentence_id
        .trim()
        .parse::<u8>()
        .map_err(|_| format!("bad sentence_id '{}'", raw.sentence_id))?;
    let repetition = raw
        .repetition
        .trim()
        .parse::<u8>()
        .map_err(|_| format!("bad repetition '{}'", raw.repetition))?;
    let emotion = raw.emotion.trim().parse::<Emotion>().map_err(|e| e.to_string())?;
    let record = UtteranceRecord {
        path: PathBuf::from(raw.path),
        speaker_id: raw.speaker_id.trim().to_string(),
        sentence_id,
        emotion,
        repetition,
    };
    record.validate()?;
    Ok(record)
}

/// Loads a manifest CSV. Relative paths are resolved against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut records = parse_manifest(&text)?;
    for r in &mut records {
        if r.path.is_relative() {
            r.path = base.join(&r.path);
        }
    }
    Ok(records)
}

/// Parses manifest text; paths are returned verbatim.
pub fn parse_manifest(text: &str) -> Result<Vec<UtteranceRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let raw: RawRecord = row.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let record = parse_row(raw).map_err(|message| Error::Parse { line, message })?;
        out.push(record);
    }
    Ok(out)
}

/// Serializes records to manifest CSV text (paths written as given).
pub fn manifest_to_string(records: &[UtteranceRecord]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(MANIFEST_HEADER).expect("writing to memory");
    for r in records {
        writer
            .write_record([
                r.path.to_string_lossy().as_ref(),
                r.speaker_id.as_str(),
                &r.sentence_id.to_string(),
                r.emotion.as_str(),
                &r.repetition.to_string(),
            ])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("flushing memory writer")).expect("utf-8 csv")
}

pub fn write_manifest(records: &[UtteranceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest_to_string(records)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, bits: u16, samples: &[i32]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: bits,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            if bits == 16 {
                w.write_sample(s as i16).unwrap();
            } else {
                w.write_sample(s).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn reads_header_and_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, 16, &vec![100; 16000]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.len(), 16000);
        assert_eq!(clip.sample_rate, 16000);
    }

    #[test]
    fn min_sample_scales_to_minus_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw(&p, 1, 16, &[-32768, 0]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples[0], -1.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_raw(&p, 2, 16, &[16384, -16384, 16384, -16384]);
        let clip = read_wav(&p).unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_24_bit_and_empty_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.wav");
        write_raw(&p, 1, 24, &[1, 2, 3]);
        assert!(matches!(read_wav(&p), Err(Error::Unsupported(_))));

        let e = dir.path().join("e.wav");
        write_raw(&e, 1, 16, &[]);
        assert!(matches!(read_wav(&e), Err(Error::EmptyAudio)));

        let g = dir.path().join("g.wav");
        std::fs::write(&g, b"RIFX0000junkjunkjunk").unwrap();
        assert!(matches!(read_wav(&g), Err(Error::Format(_))));

        assert!(matches!(
            read_wav(dir.path().join("missing.wav")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn clamps_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let clip = AudioClip::new(vec![2.0, 0.0, -3.0], 8000).unwrap();
        write_wav(&clip, &p).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.samples, vec![32767.0 / 32768.0, 0.0, -1.0]);
        assert_eq!(back.sample_rate, 8000);
    }

    #[test]
    fn manifest_parses_and_reports_line() {
        let ok = "path,speaker_id,sentence_id,emotion,repetition\na.wav,spk01,3,anger,9\n";
        let recs = parse_manifest(ok).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].emotion, Emotion::Anger);

        let bad = "path,speaker_id,sentence_id,emotion,repetition\n\
                   a.wav,spk01,3,anger,9\n\
                   b.wav,spk01,9,neutral,1\n";
        match parse_manifest(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let emo = "path,speaker_id,sentence_id,emotion,repetition\na.wav,s,1,bored,1\n";
        assert!(matches!(parse_manifest(emo), Err(Error::Parse { line: 2, .. })));

        let hdr = "file,speaker,sentence,emotion,rep\n";
        assert!(matches!(parse_manifest(hdr), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn manifest_text_round_trip() {
        let recs = vec![UtteranceRecord {
            path: "x/y.wav".into(),
            speaker_id: "spk02".into(),
            sentence_id: 5,
            emotion: Emotion::Fear,
            repetition: 2,
        }];
        assert_eq!(parse_manifest(&manifest_to_string(&recs)).unwrap(), recs);
    }
}
