//! Domain types shared by every stage: stimuli, recording layout, trials
//! and per-subject datasets, plus structural validation.

use std::collections::HashSet;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::ProtocolSchedule;

/// The 14 Emotiv EPOC+ electrode names in headset column order.
pub const EMOTIV_CHANNELS: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

/// Occipital pair used for online classification.
pub const OCCIPITAL_CHANNELS: [&str; 2] = ["O1", "O2"];

/// Dense command index `0..N-1`, in stimulus-list order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommandLabel(pub usize);

impl CommandLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for CommandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for CommandLabel {
    fn from(v: usize) -> Self {
        CommandLabel(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub label_id: usize,
    pub name: String,
    pub frequency_hz: f64,
    #[serde(default = "default_color")]
    pub color: String,
}

fn default_color() -> String {
    "green".to_string()
}

impl StimulusSpec {
    pub fn new(label_id: usize, name: &str, frequency_hz: f64) -> Self {
        StimulusSpec {
            label_id,
            name: name.to_string(),
            frequency_hz,
            color: default_color(),
        }
    }

    pub fn label(&self) -> CommandLabel {
        CommandLabel(self.label_id)
    }
}

/// Three green flickering buttons: cube at 12 Hz, delete-all at 10 Hz,
/// sphere at 8.57 Hz.
pub fn default_stimuli() -> Vec<StimulusSpec> {
    vec![
        StimulusSpec::new(0, "create_cube", 12.0),
        StimulusSpec::new(1, "delete_all", 10.0),
        StimulusSpec::new(2, "create_sphere", 8.57),
    ]
}

/// Checks the stimulus-list invariants against a sampling rate.
pub fn validate_stimuli(stimuli: &[StimulusSpec], sampling_rate_hz: f64) -> Result<()> {
    if stimuli.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 stimuli, got {}",
            stimuli.len()
        )));
    }
    let nyquist = sampling_rate_hz / 2.0;
    for (i, s) in stimuli.iter().enumerate() {
        if s.label_id != i {
            return Err(Error::invalid(format!(
                "stimulus {i} has label_id {}; labels must be dense and in list order",
                s.label_id
            )));
        }
        if !(s.frequency_hz.is_finite() && s.frequency_hz > 0.0) {
            return Err(Error::invalid(format!(
                "stimulus {i} frequency {} is not positive",
                s.frequency_hz
            )));
        }
        if s.frequency_hz >= nyquist {
            return Err(Error::AboveNyquist {
                what: format!("stimulus `{}`", s.name),
                freq_hz: s.frequency_hz,
                nyquist_hz: nyquist,
            });
        }
        for other in &stimuli[..i] {
            if other.frequency_hz == s.frequency_hz {
                return Err(Error::invalid(format!(
                    "stimuli `{}` and `{}` share frequency {} Hz",
                    other.name, s.name, s.frequency_hz
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordingSpec {
    pub sampling_rate_hz: f64,
    pub channels: Vec<String>,
    pub samples_per_trial: usize,
    pub flicker_seconds: f64,
    pub rest_seconds: f64,
}

impl Default for RecordingSpec {
    fn default() -> Self {
        RecordingSpec {
            sampling_rate_hz: 257.0,
            channels: EMOTIV_CHANNELS.iter().map(|s| s.to_string()).collect(),
            samples_per_trial: 1285,
            flicker_seconds: 5.0,
            rest_seconds: 5.0,
        }
    }
}

impl RecordingSpec {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sampling_rate_hz / 2.0
    }

    /// Width of one FFT bin for a full trial.
    pub fn resolution_hz(&self) -> f64 {
        self.sampling_rate_hz / self.samples_per_trial as f64
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        if self.channels.is_empty() {
            return Err(Error::invalid("at least one channel is required"));
        }
        let mut seen = HashSet::new();
        for c in &self.channels {
            if !seen.insert(c.as_str()) {
                return Err(Error::invalid(format!("duplicate channel name `{c}`")));
            }
        }
        if !(self.flicker_seconds > 0.0 && self.rest_seconds >= 0.0) {
            return Err(Error::invalid(
                "flicker must be positive and rest non-negative",
            ));
        }
        let expected = (self.sampling_rate_hz * self.flicker_seconds).round() as usize;
        if self.samples_per_trial != expected {
            return Err(Error::invalid(format!(
                "samples_per_trial {} != round(sampling_rate * flicker_seconds) = {expected}",
                self.samples_per_trial
            )));
        }
        Ok(())
    }
}

/// One flicker window: `samples_per_trial` rows by one column per channel,
/// ear-referenced potentials in nominal microvolts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecording {
    pub samples: Array2<f64>,
    pub true_label: CommandLabel,
    pub trial_index: usize,
    pub session_index: usize,
    pub subject_id: String,
}

impl TrialRecording {
    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.samples.view()
    }

    /// Stable identifier used in reports and file names.
    pub fn key(&self) -> String {
        format!(
            "{}/s{}/t{}",
            self.subject_id, self.session_index, self.trial_index
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { seed: u64, profile: String },
    Files { paths: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectDataset {
    pub spec: RecordingSpec,
    pub stimuli: Vec<StimulusSpec>,
    pub trials: Vec<TrialRecording>,
    pub provenance: Provenance,
    /// Schedule the trials were recorded under, when known.
    pub schedule: Option<ProtocolSchedule>,
}

impl SubjectDataset {
    pub fn subject_id(&self) -> Option<&str> {
        self.trials.first().map(|t| t.subject_id.as_str())
    }

    pub fn labels(&self) -> Vec<CommandLabel> {
        self.trials.iter().map(|t| t.true_label).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Position of the offending trial in `SubjectDataset::trials`, if any.
    pub trial: Option<usize>,
    pub rule: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.trial {
            Some(i) => write!(f, "trial {i}: {}: {}", self.rule, self.detail),
            None => write!(f, "dataset: {}: {}", self.rule, self.detail),
        }
    }
}

/// Lists every structural invariant the dataset breaks. An empty list means
/// the dataset is well formed.
pub fn validate_dataset(dataset: &SubjectDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut dataset_violation = |rule: &str, detail: String| {
        out.push(Violation {
            trial: None,
            rule: rule.to_string(),
            detail,
        })
    };
    if let Err(e) = dataset.spec.validate() {
        dataset_violation("recording spec", e.to_string());
    }
    if let Err(e) = validate_stimuli(&dataset.stimuli, dataset.spec.sampling_rate_hz) {
        dataset_violation("stimuli", e.to_string());
    }

    let rows = dataset.spec.samples_per_trial;
    let cols = dataset.spec.n_channels();
    let n_labels = dataset.stimuli.len();
    for (i, trial) in dataset.trials.iter().enumerate() {
        let mut push = |rule: &str, detail: String| {
            out.push(Violation {
                trial: Some(i),
                rule: rule.to_string(),
                detail,
            })
        };
        if trial.n_samples() != rows {
            push(
                "row count",
                format!("expected {rows}, got {}", trial.n_samples()),
            );
        }
        if trial.n_channels() != cols {
            push(
                "column count",
                format!("expected {cols}, got {}", trial.n_channels()),
            );
        }
        if let Some(pos) = trial.samples.iter().position(|v| !v.is_finite()) {
            let (r, c) = (
                pos / trial.n_channels().max(1),
                pos % trial.n_channels().max(1),
            );
            push("non-finite value", format!("at row {r}, column {c}"));
        }
        if trial.true_label.0 >= n_labels {
            push(
                "label out of range",
                format!("label {} but only {n_labels} stimuli", trial.true_label),
            );
        }
    }

    if let Some(schedule) = &dataset.schedule {
        for (s, session) in schedule.sessions.iter().enumerate() {
            let expected = session.labels();
            let got: Vec<CommandLabel> = dataset
                .trials
                .iter()
                .filter(|t| t.session_index == s)
                .map(|t| t.true_label)
                .collect();
            if got.len() != expected.len() {
                out.push(Violation {
                    trial: None,
                    rule: "session trial count".into(),
                    detail: format!(
                        "session {s}: schedule has {} trials, dataset has {}",
                        expected.len(),
                        got.len()
                    ),
                });
            } else if got != expected {
                out.push(Violation {
                    trial: None,
                    rule: "session label sequence".into(),
                    detail: format!("session {s}: labels do not follow the schedule"),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn tiny_dataset() -> SubjectDataset {
        let spec = RecordingSpec::default();
        let trials = (0..3)
            .map(|i| TrialRecording {
                samples: Array2::zeros((spec.samples_per_trial, spec.n_channels())),
                true_label: CommandLabel(i % 3),
                trial_index: i,
                session_index: 0,
                subject_id: "S".into(),
            })
            .collect();
        SubjectDataset {
            spec,
            stimuli: default_stimuli(),
            trials,
            provenance: Provenance::Files { paths: vec![] },
            schedule: None,
        }
    }

    #[test]
    fn default_recording_arithmetic() {
        let spec = RecordingSpec::default();
        assert_eq!(257.0 * 5.0, 1285.0);
        assert_eq!(spec.samples_per_trial, 1285);
        assert_eq!(spec.resolution_hz(), 0.2);
        assert_eq!(spec.n_channels(), 14);
        spec.validate().unwrap();
    }

    #[test]
    fn default_stimuli_are_valid() {
        validate_stimuli(&default_stimuli(), 257.0).unwrap();
    }

    #[test]
    fn stimuli_rules() {
        let mut s = default_stimuli();
        s[2].frequency_hz = 12.0;
        assert!(validate_stimuli(&s, 257.0).is_err());
        assert!(validate_stimuli(&default_stimuli()[..1], 257.0).is_err());
        let mut s = default_stimuli();
        s[0].frequency_hz = 130.0;
        assert!(matches!(
            validate_stimuli(&s, 257.0),
            Err(Error::AboveNyquist { .. })
        ));
    }

    #[test]
    fn clean_dataset_has_no_violations() {
        assert!(validate_dataset(&tiny_dataset()).is_empty());
    }

    #[test]
    fn short_trial_is_reported() {
        let mut ds = tiny_dataset();
        ds.trials[2].samples = Array2::zeros((1284, 14));
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].trial, Some(2));
        assert_eq!(v[0].rule, "row count");
    }

    #[test]
    fn nan_is_reported() {
        let mut ds = tiny_dataset();
        ds.trials[1].samples[[10, 3]] = f64::NAN;
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "non-finite value");
        assert!(v[0].detail.contains("row 10, column 3"));
    }

    #[test]
    fn duplicate_channels_rejected() {
        let mut spec = RecordingSpec::default();
        spec.channels[1] = "AF3".into();
        assert!(spec.validate().is_err());
    }
}
