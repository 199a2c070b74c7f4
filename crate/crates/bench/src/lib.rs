//! Shared fixtures for the benchmarks.

use voxid_core::classifier::pool_utterance;
use voxid_core::corpus::{speaker_profiles, synth_utterance};
use voxid_core::features::{extract, FeatureConfig, FeatureMethod};
use voxid_core::{AudioClip, Emotion};

/// One synthetic training utterance of the first speaker.
pub fn sample_clip() -> AudioClip {
    let profiles = speaker_profiles(2, 7).expect("profiles");
    synth_utterance(&profiles[0], 1, Emotion::Neutral, 1, 7).expect("synthesis")
}

/// Pooled MFCC Δ² embeddings for `n_speakers` speakers with four neutral
/// utterances each, with their labels.
pub fn embedding_set(n_speakers: usize) -> (Vec<Vec<f64>>, Vec<String>) {
    let cfg = FeatureConfig::default();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for p in speaker_profiles(n_speakers, 11).expect("profiles") {
        for sentence in 1..=4 {
            let clip = synth_utterance(&p, sentence, Emotion::Neutral, 1, 11).expect("synthesis");
            let m = extract(&clip, FeatureMethod::MfccDeltaDelta, &cfg).expect("features");
            x.push(pool_utterance(&m).expect("pooling").values);
            y.push(p.speaker_id.clone());
        }
    }
    (x, y)
}
