//! Periodized orthonormal wavelet transforms: single DWT step, full wavelet
//! packet tree, and the hybrid DWT-chain + packet-leaf energy feature.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::dsp::{energy, frame_signal};
use crate::error::{Error, Result};

use super::{FeatureConfig, FeatureMatrix, FeatureMethod};

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

// Daubechies scaling filter with four vanishing moments (8 taps), from a
// 50-digit spectral factorization.
const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db4,
}

impl Wavelet {
    pub fn lowpass(self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &HAAR,
            Wavelet::Db4 => &DB4,
        }
    }

    /// Quadrature mirror of the lowpass: g[m] = (−1)^m h[L−1−m].
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|m| if m % 2 == 0 { h[l - 1 - m] } else { -h[l - 1 - m] })
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Wavelet::Haar => "haar",
            Wavelet::Db4 => "db4",
        }
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Wavelet::Haar),
            "db4" => Ok(Wavelet::Db4),
            other => Err(Error::param(format!("unknown wavelet '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwtOutput {
    pub approx: Vec<f64>,
    pub detail: Vec<f64>,
    /// True when an odd-length input was extended by one zero.
    pub padded: bool,
}

/// One analysis level: filter with the lowpass/highpass pair and keep
/// every second output, wrapping periodically at the boundary.
pub fn dwt_step(signal: &[f64], wavelet: Wavelet) -> Result<DwtOutput> {
    if signal.is_empty() {
        return Err(Error::param("cannot transform an empty signal"));
    }
    let padded = signal.len() % 2 == 1;
    let owned;
    let x: &[f64] = if padded {
        owned = signal.iter().copied().chain(std::iter::once(0.0)).collect::<Vec<_>>();
        &owned
    } else {
        signal
    };
    let n = x.len();
    let h = wavelet.lowpass();
    let g = wavelet.highpass();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (m, (hm, gm)) in h.iter().zip(&g).enumerate() {
            let v = x[(2 * k + m) % n];
            a += hm * v;
            d += gm * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok(DwtOutput { approx, detail, padded })
}

/// Full packet tree to `depth`; the 2^depth leaves are returned in tree
/// path order (lowpass branch first at every node).
pub fn wpd_decompose(signal: &[f64], depth: usize, wavelet: Wavelet) -> Result<Vec<Vec<f64>>> {
    if depth < 1 {
        return Err(Error::param("wavelet packet depth must be at least 1"));
    }
    if depth >= usize::BITS as usize || signal.len() < (1usize << depth) {
        return Err(Error::param(format!(
            "signal of {} samples too short for depth {depth}",
            signal.len()
        )));
    }
    let mut level = vec![signal.to_vec()];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for node in &level {
            let out = dwt_step(node, wavelet)?;
            next.push(out.approx);
            next.push(out.detail);
        }
        level = next;
    }
    Ok(level)
}

/// Classic DWT chain: details d_1..d_depth followed by the final approx.
pub fn dwt_chain(signal: &[f64], depth: usize, wavelet: Wavelet) -> Result<Vec<Vec<f64>>> {
    if depth < 1 {
        return Err(Error::param("wavelet depth must be at least 1"));
    }
    if depth >= usize::BITS as usize || signal.len() < (1usize << depth) {
        return Err(Error::param(format!(
            "signal of {} samples too short for depth {depth}",
            signal.len()
        )));
    }
    let mut nodes = Vec::with_capacity(depth + 1);
    let mut current = signal.to_vec();
    for _ in 0..depth {
        let out = dwt_step(&current, wavelet)?;
        nodes.push(out.detail);
        current = out.approx;
    }
    nodes.push(current);
    Ok(nodes)
}

pub fn dwpd_dim(depth: usize) -> usize {
    depth + 1 + (1 << depth)
}

/// Log-energies of one frame: DWT chain nodes, then packet leaves.
pub fn dwpd_frame(frame: &[f64], depth: usize, wavelet: Wavelet, log_floor: f64) -> Result<Vec<f64>> {
    let chain = dwt_chain(frame, depth, wavelet)?;
    let leaves = wpd_decompose(frame, depth, wavelet)?;
    Ok(chain
        .iter()
        .chain(&leaves)
        .map(|node| energy(node).max(log_floor).ln())
        .collect())
}

pub fn dwpd_features(clip: &AudioClip, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    let frames = frame_signal(clip, cfg.frame_ms, cfg.hop_ms, cfg.window)?;
    let vectors = frames
        .frames
        .iter()
        .map(|f| dwpd_frame(f, cfg.dwpd_depth, cfg.wavelet, cfg.log_floor))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(vectors, FeatureMethod::Dwpd, dwpd_dim(cfg.dwpd_depth), frames.geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    /// Periodized synthesis; transpose of the analysis operator.
    fn idwt_step(approx: &[f64], detail: &[f64], wavelet: Wavelet) -> Vec<f64> {
        let n = approx.len() * 2;
        let h = wavelet.lowpass();
        let g = wavelet.highpass();
        let mut x = vec![0.0; n];
        for k in 0..approx.len() {
            for m in 0..h.len() {
                x[(2 * k + m) % n] += h[m] * approx[k] + g[m] * detail[k];
            }
        }
        x
    }

    #[test]
    fn haar_hand_values() {
        let out = dwt_step(&[1.0, 1.0, 1.0, 1.0], Wavelet::Haar).unwrap();
        assert!(out.approx.iter().all(|v| (v - SQRT_2).abs() < 1e-15));
        assert!(out.detail.iter().all(|v| v.abs() < 1e-15));

        let out = dwt_step(&[1.0, -1.0], Wavelet::Haar).unwrap();
        assert!(out.approx[0].abs() < 1e-15);
        assert!((out.detail[0] - SQRT_2).abs() < 1e-15);

        let z = dwt_step(&[0.0; 6], Wavelet::Db4).unwrap();
        assert!(z.approx.iter().chain(&z.detail).all(|&v| v == 0.0));
    }

    #[test]
    fn filters_are_orthonormal() {
        for w in [Wavelet::Haar, Wavelet::Db4] {
            let h = w.lowpass();
            assert!((h.iter().sum::<f64>() - SQRT_2).abs() < 1e-14);
            for shift in (0..h.len()).step_by(2) {
                let dot: f64 = h[shift..].iter().zip(h).map(|(a, b)| a * b).sum();
                let want = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn odd_input_is_padded() {
        let out = dwt_step(&[1.0, 2.0, 3.0], Wavelet::Haar).unwrap();
        assert!(out.padded);
        assert_eq!(out.approx.len(), 2);
    }

    #[test]
    fn unknown_wavelet_name() {
        assert!(matches!("sym5".parse::<Wavelet>(), Err(Error::Param(_))));
        assert_eq!("db4".parse::<Wavelet>().unwrap(), Wavelet::Db4);
    }

    #[test]
    fn wpd_shape_and_errors() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let leaves = wpd_decompose(&x, 3, Wavelet::Db4).unwrap();
        assert_eq!(leaves.len(), 8);
        assert!(leaves.iter().all(|l| l.len() == 8));
        assert!(wpd_decompose(&x[..4], 3, Wavelet::Haar).is_err());
        assert!(wpd_decompose(&x, 0, Wavelet::Haar).is_err());
    }

    #[test]
    fn dwpd_dimension_and_silence() {
        assert_eq!(dwpd_dim(3), 12);
        let f = dwpd_frame(&[0.0; 400], 3, Wavelet::Db4, 1e-10).unwrap();
        assert_eq!(f.len(), 12);
        assert!(f.iter().all(|&v| v == 1e-10_f64.ln()));
    }

    #[test]
    fn low_tone_energy_sits_in_final_approx() {
        // 100 Hz at 16 kHz is far below the 1 kHz edge of the depth-3 approx band.
        let x: Vec<f64> = (0..400)
            .map(|n| (2.0 * PI * 100.0 * n as f64 / 16000.0).sin())
            .collect();
        for w in [Wavelet::Haar, Wavelet::Db4] {
            let f = dwpd_frame(&x, 3, w, 1e-10).unwrap();
            let chain = &f[..4];
            let max = chain.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(chain[3], max);
        }
    }

    proptest! {
        #[test]
        fn single_level_perfect_reconstruction(
            half in proptest::collection::vec(-1.0f64..1.0, 1..64),
            extra in proptest::collection::vec(-1.0f64..1.0, 1..64),
        ) {
            let mut x = half;
            x.extend(extra);
            if x.len() % 2 == 1 { x.pop(); }
            for w in [Wavelet::Haar, Wavelet::Db4] {
                let out = dwt_step(&x, w).unwrap();
                let e_in = energy(&x);
                prop_assert!((energy(&out.approx) + energy(&out.detail) - e_in).abs() < 1e-10);
                let back = idwt_step(&out.approx, &out.detail, w);
                for (a, b) in back.iter().zip(&x) {
                    prop_assert!((a - b).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn packet_leaves_conserve_energy(x in proptest::collection::vec(-1.0f64..1.0, 8..300)) {
            let mut x = x;
            x.truncate(x.len() / 8 * 8);
            for w in [Wavelet::Haar, Wavelet::Db4] {
                let leaves = wpd_decompose(&x, 3, w).unwrap();
                let total: f64 = leaves.iter().map(|l| energy(l)).sum();
                prop_assert!((total - energy(&x)).abs() < 1e-8);
            }
        }
    }
}
