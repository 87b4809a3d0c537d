//! SSVEP command recognition: synthetic EEG, spectral preprocessing, an
//! accuracy-weighted ensemble of SVM and random-forest classifiers, and
//! offline/online experiment tooling.

pub mod classifiers;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod metrics;
pub mod preprocess;
pub mod protocol;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{CommandLabel, RecordingSpec, StimulusSpec, SubjectDataset, TrialRecording};
