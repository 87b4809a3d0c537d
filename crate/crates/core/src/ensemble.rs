//! Training-accuracy-weighted vote over (preprocessing, classifier) variants.
//!
//! The default bank crosses four preprocessing configurations (CAR+PCA,
//! CAR only, PCA only, neither) with an SVM and a random forest, giving
//! eight variants. Each variant fits its own PCA and z-score on its own
//! view of the same training trials.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierKind, TrainableSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::preprocess::{FittedPreprocess, PreprocessConfig};
use crate::types::{CommandLabel, RecordingSpec, StimulusSpec, TrialRecording};

/// The four preprocessing configurations on a given channel set, in the
/// order CAR+PCA, CAR, PCA, neither.
pub fn default_configs(base: &PreprocessConfig) -> Vec<PreprocessConfig> {
    [(true, true), (true, false), (false, true), (false, false)]
        .into_iter()
        .map(|(car, pca)| base.clone().with_flags(car, pca))
        .collect()
}

/// Linear SVM and random forest with default hyperparameters.
pub fn default_classifiers(seed: u64) -> Vec<TrainableSpec> {
    vec![
        TrainableSpec::svm_linear(),
        TrainableSpec::random_forest(seed),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub preprocess: FittedPreprocess,
    pub model: TrainedModel,
}

impl Variant {
    pub fn kind(&self) -> ClassifierKind {
        self.model.kind
    }

    pub fn predict(
        &self,
        samples: ArrayView2<'_, f64>,
        spec: &RecordingSpec,
    ) -> Result<CommandLabel> {
        let features = self.preprocess.transform(samples, spec)?;
        classifiers::predict(&self.model, ndarray::ArrayView1::from(&features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub recording: RecordingSpec,
    pub stimuli: Vec<StimulusSpec>,
    pub variants: Vec<Variant>,
    /// Raw training accuracy of each variant, in variant order.
    pub weights: Vec<f64>,
}

impl EnsembleModel {
    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.stimuli.len()
    }

    pub fn variant_names(&self) -> Vec<&str> {
        self.variants.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn stimulus_name(&self, label: CommandLabel) -> &str {
        self.stimuli
            .get(label.0)
            .map(|s| s.name.as_str())
            .unwrap_or("unknown")
    }

    /// Shape and finiteness checks for a trial about to be classified.
    pub fn check_trial(&self, samples: ArrayView2<'_, f64>) -> Result<()> {
        if samples.nrows() != self.recording.samples_per_trial {
            return Err(Error::DimensionMismatch {
                expected: self.recording.samples_per_trial,
                actual: samples.nrows(),
            });
        }
        if samples.ncols() != self.recording.n_channels() {
            return Err(Error::DimensionMismatch {
                expected: self.recording.n_channels(),
                actual: samples.ncols(),
            });
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(())
    }
}

/// Fits every (config, classifier) pair on `train`; classifiers vary in the
/// outer loop so all SVM variants come first.
pub fn build_ensemble(
    train: &[TrialRecording],
    recording: &RecordingSpec,
    stimuli: &[StimulusSpec],
    classifier_specs: &[TrainableSpec],
    configs: &[PreprocessConfig],
) -> Result<EnsembleModel> {
    if train.is_empty() {
        return Err(Error::invalid(
            "cannot build an ensemble from an empty training set",
        ));
    }
    if classifier_specs.is_empty() || configs.is_empty() {
        return Err(Error::invalid(
            "ensemble needs at least one classifier and one config",
        ));
    }
    let labels: Vec<CommandLabel> = train.iter().map(|t| t.true_label).collect();
    if let Some(bad) = labels.iter().find(|l| l.0 >= stimuli.len()) {
        return Err(Error::invalid(format!(
            "training label {bad} has no stimulus"
        )));
    }

    let jobs: Vec<(&TrainableSpec, &PreprocessConfig)> = classifier_specs
        .iter()
        .flat_map(|c| configs.iter().map(move |p| (c, p)))
        .collect();
    let variants = jobs
        .par_iter()
        .map(|(clf, cfg)| {
            let (preprocess, features) =
                FittedPreprocess::fit(cfg, recording, stimuli, train.iter().map(|t| t.view()))?;
            let model = classifiers::train(clf, features.view(), &labels)?;
            let mut name = format!("{}/{}", clf.kind().tag(), cfg.tag());
            if preprocess.pca_degenerate {
                name.push_str("(no-pca)");
            }
            Ok(Variant {
                name,
                preprocess,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = variants.iter().map(|v| v.model.training_accuracy).collect();
    Ok(EnsembleModel {
        recording: recording.clone(),
        stimuli: stimuli.to_vec(),
        variants,
        weights,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub winner: CommandLabel,
    /// Summed weight per label id.
    pub tally: Vec<f64>,
}

impl Vote {
    pub fn winning_tally(&self) -> f64 {
        self.tally[self.winner.0]
    }
}

/// `tally[l]` is the summed weight of the variants predicting `l`; the
/// winner is the largest tally, with exact ties going to the lowest label.
pub fn weighted_vote(
    predictions: &[CommandLabel],
    weights: &[f64],
    n_labels: usize,
) -> Result<Vote> {
    if predictions.is_empty() {
        return Err(Error::invalid("weighted vote over no predictions"));
    }
    if predictions.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            actual: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!(
            "vote weight {w} is not a finite non-negative number"
        )));
    }
    let width = predictions
        .iter()
        .map(|p| p.0 + 1)
        .max()
        .unwrap_or(0)
        .max(n_labels);
    let mut tally = vec![0.0; width];
    for (p, w) in predictions.iter().zip(weights) {
        tally[p.0] += w;
    }
    let mut winner = 0;
    for (l, &t) in tally.iter().enumerate() {
        if t > tally[winner] {
            winner = l;
        }
    }
    Ok(Vote {
        winner: CommandLabel(winner),
        tally,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePrediction {
    pub label: CommandLabel,
    pub tally: Vec<f64>,
    pub per_variant: Vec<CommandLabel>,
}

impl EnsemblePrediction {
    pub fn winning_tally(&self) -> f64 {
        self.tally[self.label.0]
    }
}

pub fn ensemble_predict(
    model: &EnsembleModel,
    samples: ArrayView2<'_, f64>,
) -> Result<EnsemblePrediction> {
    if model.is_empty() {
        return Err(Error::invalid("ensemble has no variants"));
    }
    model.check_trial(samples)?;
    let per_variant = model
        .variants
        .iter()
        .map(|v| v.predict(samples, &model.recording))
        .collect::<Result<Vec<_>>>()?;
    let vote = weighted_vote(&per_variant, &model.weights, model.n_labels())?;
    Ok(EnsemblePrediction {
        label: vote.winner,
        tally: vote.tally,
        per_variant,
    })
}
