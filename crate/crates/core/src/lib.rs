//! Speaker identification under voice disguise.
//!
//! Feature extractors (MFCC with deltas, LPC, hybrid wavelet energies,
//! DCT), voice disguise effects, SVM and PLDA backends, a synthetic corpus
//! generator and the experiment harness that ties them together.

pub mod audio;
pub mod classifier;
pub mod corpus;
pub mod disguise;
pub mod dsp;
pub mod error;
pub mod features;
pub mod harness;
mod persist;
pub mod plda;

pub use audio::{AudioClip, Emotion, UtteranceRecord};
pub use classifier::{SvmModel, SvmParams, UtteranceEmbedding};
pub use disguise::{DisguiseSpec, Effect};
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureMatrix, FeatureMethod};
pub use harness::{EvalReport, ExperimentConfig, ExperimentMethod, ReportFormat};
pub use plda::{PldaModel, PldaOptions};
