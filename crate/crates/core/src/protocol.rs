//! Recording schedule, stream slicing, stratified splitting, and the
//! offline and online experiment runners.

use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::TrainableSpec;
use crate::ensemble::{
    build_ensemble, default_classifiers, default_configs, ensemble_predict, EnsembleModel,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, itr_for, paired_t_test, TTest, TimeBase};
use crate::preprocess::PreprocessConfig;
use crate::types::{CommandLabel, RecordingSpec, SubjectDataset, TrialRecording};

/// One session: part a, a long rest, then part b.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub part_a: Vec<CommandLabel>,
    pub part_b: Vec<CommandLabel>,
}

impl SessionPlan {
    pub fn labels(&self) -> Vec<CommandLabel> {
        self.part_a.iter().chain(&self.part_b).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.part_a.len() + self.part_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSchedule {
    pub sessions: Vec<SessionPlan>,
    pub flicker_seconds: f64,
    pub rest_seconds: f64,
    pub inter_part_rest_seconds: f64,
}

pub const PART_A_TRIALS: usize = 12;
pub const PART_B_TRIALS: usize = 13;
pub const OFFLINE_SESSIONS: usize = 5;

/// Per-label counts of `labels`, `n_labels` wide.
fn label_counts(labels: &[CommandLabel], n_labels: usize) -> Vec<usize> {
    let mut c = vec![0; n_labels];
    for l in labels {
        if l.0 < n_labels {
            c[l.0] += 1;
        }
    }
    c
}

fn near_balanced(labels: &[CommandLabel], n_labels: usize) -> bool {
    let c = label_counts(labels, n_labels);
    let (lo, hi) = (c.iter().min(), c.iter().max());
    matches!((lo, hi), (Some(lo), Some(hi)) if hi - lo <= 1)
}

/// A valid part-a sequence has twelve in-range labels whose counts differ
/// by at most one.
pub fn validate_part_a(labels: &[CommandLabel], n_labels: usize) -> Result<()> {
    if labels.len() != PART_A_TRIALS {
        return Err(Error::invalid(format!(
            "part a needs {PART_A_TRIALS} trials, got {}",
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|l| l.0 >= n_labels) {
        return Err(Error::invalid(format!(
            "label {l} out of range for {n_labels} commands"
        )));
    }
    if !near_balanced(labels, n_labels) {
        return Err(Error::invalid("part a is not balanced across commands"));
    }
    Ok(())
}

impl ProtocolSchedule {
    /// A single session holding `labels` as part a.
    pub fn single(labels: Vec<CommandLabel>) -> Self {
        ProtocolSchedule {
            sessions: vec![SessionPlan {
                part_a: labels,
                part_b: Vec::new(),
            }],
            ..ProtocolSchedule::empty()
        }
    }

    fn empty() -> Self {
        ProtocolSchedule {
            sessions: Vec::new(),
            flicker_seconds: 5.0,
            rest_seconds: 5.0,
            inter_part_rest_seconds: 30.0,
        }
    }

    pub fn n_trials(&self) -> usize {
        self.sessions.iter().map(SessionPlan::len).sum()
    }

    pub fn labels(&self) -> Vec<CommandLabel> {
        self.sessions.iter().flat_map(SessionPlan::labels).collect()
    }

    /// Seconds from session start to the flicker onset of each trial.
    pub fn trial_onsets(&self, session: usize) -> Vec<f64> {
        let Some(plan) = self.sessions.get(session) else {
            return Vec::new();
        };
        let period = self.flicker_seconds + self.rest_seconds;
        let part_b_start = plan.part_a.len() as f64 * period
            + if plan.part_a.is_empty() {
                0.0
            } else {
                self.inter_part_rest_seconds
            };
        (0..plan.part_a.len())
            .map(|i| i as f64 * period)
            .chain((0..plan.part_b.len()).map(|j| part_b_start + j as f64 * period))
            .collect()
    }

    /// Full session timeline in seconds, trailing rest included.
    pub fn session_seconds(&self, session: usize) -> f64 {
        let Some(plan) = self.sessions.get(session) else {
            return 0.0;
        };
        let period = self.flicker_seconds + self.rest_seconds;
        let gap = if plan.part_a.is_empty() || plan.part_b.is_empty() {
            0.0
        } else {
            self.inter_part_rest_seconds
        };
        plan.len() as f64 * period + gap
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        if self.sessions.is_empty() || self.n_trials() == 0 {
            return Err(Error::invalid("schedule has no trials"));
        }
        for (what, v) in [
            ("flicker_seconds", self.flicker_seconds),
            ("rest_seconds", self.rest_seconds),
            ("inter_part_rest_seconds", self.inter_part_rest_seconds),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{what} must be non-negative, got {v}"
                )));
            }
        }
        if self.flicker_seconds <= 0.0 {
            return Err(Error::invalid("flicker_seconds must be positive"));
        }
        for (s, plan) in self.sessions.iter().enumerate() {
            if let Some(l) = plan.labels().iter().find(|l| l.0 >= n_labels) {
                return Err(Error::invalid(format!(
                    "session {s}: label {l} out of range for {n_labels} commands"
                )));
            }
        }
        Ok(())
    }

    /// True when every session has the 12 + 13 layout and near-balanced
    /// label counts.
    pub fn is_offline_layout(&self, n_labels: usize) -> bool {
        self.sessions.iter().all(|p| {
            p.part_a.len() == PART_A_TRIALS
                && p.part_b.len() == PART_B_TRIALS
                && near_balanced(&p.labels(), n_labels)
        })
    }
}

/// Five sessions of 12 + 13 pseudorandom trials over three commands. Each
/// session holds 8 of every command plus one extra that rotates with the
/// session index.
pub fn make_offline_schedule(seed: u64) -> ProtocolSchedule {
    make_schedule(seed, 3, OFFLINE_SESSIONS)
}

pub fn make_schedule(seed: u64, n_labels: usize, n_sessions: usize) -> ProtocolSchedule {
    let per_session = PART_A_TRIALS + PART_B_TRIALS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sessions = (0..n_sessions)
        .map(|s| {
            let mut labels: Vec<CommandLabel> = (0..per_session)
                .map(|i| CommandLabel((i + s) % n_labels.max(1)))
                .collect();
            labels.shuffle(&mut rng);
            let part_b = labels.split_off(PART_A_TRIALS);
            SessionPlan {
                part_a: labels,
                part_b,
            }
        })
        .collect();
    ProtocolSchedule {
        sessions,
        ..ProtocolSchedule::empty()
    }
}

/// Cuts the flicker windows of `session` out of a continuous recording
/// that starts at the session's first flicker onset.
pub fn slice_recording(
    stream: ArrayView2<'_, f64>,
    schedule: &ProtocolSchedule,
    session: usize,
    spec: &RecordingSpec,
    subject_id: &str,
) -> Result<Vec<TrialRecording>> {
    let plan = schedule
        .sessions
        .get(session)
        .ok_or_else(|| Error::invalid(format!("schedule has no session {session}")))?;
    if stream.ncols() != spec.n_channels() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_channels(),
            actual: stream.ncols(),
        });
    }
    let fs = spec.sampling_rate_hz;
    let needed = (schedule.session_seconds(session) * fs).round() as usize;
    if stream.nrows() < needed {
        return Err(Error::StreamTooShort {
            expected: needed,
            actual: stream.nrows(),
        });
    }
    let len = spec.samples_per_trial;
    Ok(schedule
        .trial_onsets(session)
        .into_iter()
        .zip(plan.labels())
        .enumerate()
        .map(|(i, (onset, label))| {
            let start = (onset * fs).round() as usize;
            TrialRecording {
                samples: stream.slice(s![start..start + len, ..]).to_owned(),
                true_label: label,
                trial_index: i,
                session_index: session,
                subject_id: subject_id.to_string(),
            }
        })
        .collect())
}

/// Per-class test counts: `floor(c * (1 - f))` each, then single extra
/// trials by largest fractional remainder (lowest label first) until the
/// total reaches `n - round(n * f)`.
pub fn stratified_test_counts(class_counts: &[usize], train_fraction: f64) -> Vec<usize> {
    let n: usize = class_counts.iter().sum();
    let test_total = n - ((n as f64 * train_fraction).round() as usize).min(n);
    let exact: Vec<f64> = class_counts
        .iter()
        .map(|&c| c as f64 * (1.0 - train_fraction))
        .collect();
    let mut counts: Vec<usize> = exact
        .iter()
        .zip(class_counts)
        .map(|(e, &c)| ((e + 1e-9).floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..class_counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    for &k in order.iter().cycle().take(order.len() * 2) {
        if assigned >= test_total {
            break;
        }
        if counts[k] < class_counts[k] {
            counts[k] += 1;
            assigned += 1;
        }
    }
    counts
}

/// Splits one subject's trials into (train, test), stratified by class.
/// Both halves keep dataset order.
pub fn split_subjectwise_stratified(
    dataset: &SubjectDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<TrialRecording>, Vec<TrialRecording>)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    let trials = &dataset.trials;
    if let Some(first) = trials.first() {
        if let Some(other) = trials.iter().find(|t| t.subject_id != first.subject_id) {
            return Err(Error::invalid(format!(
                "split mixes subjects `{}` and `{}`",
                first.subject_id, other.subject_id
            )));
        }
    }
    let n_labels = trials.iter().map(|t| t.true_label.0 + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, t) in trials.iter().enumerate() {
        by_class[t.true_label.0].push(i);
    }
    for (l, members) in by_class.iter().enumerate() {
        if members.len() == 1 {
            return Err(Error::invalid(format!(
                "class {l} has 1 trial; stratified splitting needs at least 2"
            )));
        }
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let test_counts = stratified_test_counts(&counts, train_fraction);
    if test_counts.iter().all(|&c| c == 0) {
        log::warn!("train fraction {train_fraction} leaves no test trials");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; trials.len()];
    for (members, &k) in by_class.iter_mut().zip(&test_counts) {
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = trials.iter().zip(&in_test).partition(|(_, &t)| t);
    Ok((
        train.into_iter().map(|(t, _)| t.clone()).collect(),
        test.into_iter().map(|(t, _)| t.clone()).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub train_fraction: f64,
    pub split_seed: u64,
    pub classifiers: Vec<TrainableSpec>,
    pub preprocess: Vec<PreprocessConfig>,
    pub time_base: TimeBase,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_fraction: 0.8,
            split_seed: 0,
            classifiers: default_classifiers(0),
            preprocess: default_configs(&PreprocessConfig::default()),
            time_base: TimeBase::default(),
        }
    }
}

impl ExperimentConfig {
    /// Points every preprocessing configuration at `channels`.
    pub fn with_channels(mut self, channels: &[&str]) -> Self {
        for p in &mut self.preprocess {
            p.channels = channels.iter().map(|c| c.to_string()).collect();
        }
        self
    }

    pub fn with_seeds(mut self, split_seed: u64, forest_seed: u64) -> Self {
        self.split_seed = split_seed;
        for c in &mut self.classifiers {
            if let TrainableSpec::RandomForest(p) = c {
                p.seed = forest_seed;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub name: String,
    /// For the ensemble row this is the mean variant weight.
    pub training_accuracy: f64,
    pub accuracy: f64,
    pub itr_bits_per_minute: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub key: String,
    pub true_label: CommandLabel,
    pub predicted: CommandLabel,
    pub per_variant: Vec<CommandLabel>,
    pub tally: Vec<f64>,
}

/// Paired test of per-trial correctness, ensemble against the variant
/// with the best test accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub compared_with: String,
    pub test: Option<TTest>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub subject_id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub commands: Vec<String>,
    pub time_base: TimeBase,
    pub variants: Vec<VariantScore>,
    pub ensemble: VariantScore,
    /// `confusion[true][predicted]` for the ensemble.
    pub confusion: Vec<Vec<usize>>,
    pub trials: Vec<TrialOutcome>,
    pub significance: Significance,
}

impl ExperimentReport {
    pub fn best_variant(&self) -> Option<&VariantScore> {
        self.variants
            .iter()
            .fold(None, |best: Option<&VariantScore>, v| match best {
                Some(b) if b.accuracy >= v.accuracy => Some(b),
                _ => Some(v),
            })
    }

    pub fn worst_variant(&self) -> Option<&VariantScore> {
        self.variants
            .iter()
            .fold(None, |worst: Option<&VariantScore>, v| match worst {
                Some(w) if w.accuracy <= v.accuracy => Some(w),
                _ => Some(v),
            })
    }
}

/// Accuracy of each variant and of the vote over `trials`.
pub fn evaluate_ensemble(
    model: &EnsembleModel,
    trials: &[TrialRecording],
    time_base: &TimeBase,
) -> Result<(Vec<VariantScore>, VariantScore, Vec<TrialOutcome>)> {
    let outcomes = trials
        .iter()
        .map(|t| {
            let p = ensemble_predict(model, t.view())?;
            Ok(TrialOutcome {
                key: t.key(),
                true_label: t.true_label,
                predicted: p.label,
                per_variant: p.per_variant,
                tally: p.tally,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_cmd = model.n_labels();
    let truth: Vec<CommandLabel> = outcomes.iter().map(|o| o.true_label).collect();
    let score = |name: &str, train_acc: f64, preds: Vec<CommandLabel>| -> Result<VariantScore> {
        let acc = if preds.is_empty() {
            0.0
        } else {
            accuracy(&preds, &truth)?
        };
        Ok(VariantScore {
            name: name.to_string(),
            training_accuracy: train_acc,
            accuracy: acc,
            itr_bits_per_minute: itr_for(acc, n_cmd, time_base)?,
        })
    };
    let variants = model
        .variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            score(
                &v.name,
                v.model.training_accuracy,
                outcomes.iter().map(|o| o.per_variant[i]).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let ensemble = score(
        "ensemble",
        ensemble_training_accuracy(model),
        outcomes.iter().map(|o| o.predicted).collect(),
    )?;
    Ok((variants, ensemble, outcomes))
}

pub fn run_offline_experiment(
    dataset: &SubjectDataset,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let (train, test) =
        split_subjectwise_stratified(dataset, config.train_fraction, config.split_seed)?;
    let model = build_ensemble(
        &train,
        &dataset.spec,
        &dataset.stimuli,
        &config.classifiers,
        &config.preprocess,
    )?;
    report_for(&model, dataset, train.len(), &test, &config.time_base)
}

/// Scores a trained ensemble on held-out trials.
pub fn report_for(
    model: &EnsembleModel,
    dataset: &SubjectDataset,
    n_train: usize,
    test: &[TrialRecording],
    time_base: &TimeBase,
) -> Result<ExperimentReport> {
    let (variants, ensemble, trials) = evaluate_ensemble(model, test, time_base)?;
    let n_cmd = model.n_labels();
    let mut confusion = vec![vec![0usize; n_cmd]; n_cmd];
    for o in &trials {
        confusion[o.true_label.0][o.predicted.0] += 1;
    }
    let mut report = ExperimentReport {
        subject_id: dataset.subject_id().unwrap_or("").to_string(),
        n_train,
        n_test: test.len(),
        commands: model.stimuli.iter().map(|s| s.name.clone()).collect(),
        time_base: *time_base,
        variants,
        ensemble,
        confusion,
        trials,
        significance: Significance {
            compared_with: String::new(),
            test: None,
            note: String::new(),
        },
    };
    report.significance = trialwise_significance(&report);
    Ok(report)
}

fn ensemble_training_accuracy(model: &EnsembleModel) -> f64 {
    // weights are the per-variant training accuracies; report their mean
    if model.weights.is_empty() {
        0.0
    } else {
        model.weights.iter().sum::<f64>() / model.weights.len() as f64
    }
}

fn trialwise_significance(report: &ExperimentReport) -> Significance {
    let Some((best_idx, best)) = report
        .variants
        .iter()
        .enumerate()
        .rev()
        .max_by(|a, b| a.1.accuracy.total_cmp(&b.1.accuracy))
    else {
        return Significance {
            compared_with: String::new(),
            test: None,
            note: "no variants".into(),
        };
    };
    let correct = |p: CommandLabel, t: CommandLabel| if p == t { 1.0 } else { 0.0 };
    let ens: Vec<f64> = report
        .trials
        .iter()
        .map(|o| correct(o.predicted, o.true_label))
        .collect();
    let ind: Vec<f64> = report
        .trials
        .iter()
        .map(|o| correct(o.per_variant[best_idx], o.true_label))
        .collect();
    match paired_t_test(&ens, &ind) {
        Ok(t) => Significance {
            compared_with: best.name.clone(),
            test: Some(t),
            note: "paired over test trials (1 = correct)".into(),
        },
        Err(e) => Significance {
            compared_with: best.name.clone(),
            test: None,
            note: format!("not testable: {e}"),
        },
    }
}

/// Ensemble against each subject's best single variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub subjects: Vec<String>,
    pub ensemble: Vec<f64>,
    pub best_individual: Vec<f64>,
    pub mean_ensemble: f64,
    pub mean_best_individual: f64,
    pub test: Option<TTest>,
    pub note: String,
}

pub fn compare_cohort(reports: &[ExperimentReport]) -> CohortComparison {
    let ensemble: Vec<f64> = reports.iter().map(|r| r.ensemble.accuracy).collect();
    let best_individual: Vec<f64> = reports
        .iter()
        .map(|r| r.best_variant().map_or(0.0, |v| v.accuracy))
        .collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let (test, note) = match paired_t_test(&ensemble, &best_individual) {
        Ok(t) => (
            Some(t),
            "paired t-test, ensemble minus best individual".to_string(),
        ),
        Err(e) => (None, format!("not testable: {e}")),
    };
    CohortComparison {
        subjects: reports.iter().map(|r| r.subject_id.clone()).collect(),
        mean_ensemble: mean(&ensemble),
        mean_best_individual: mean(&best_individual),
        ensemble,
        best_individual,
        test,
        note,
    }
}

/// A trial arriving at the online classifier; the label is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineTrial {
    pub id: String,
    pub samples: Array2<f64>,
    pub ground_truth: Option<CommandLabel>,
}

impl From<TrialRecording> for OnlineTrial {
    fn from(t: TrialRecording) -> Self {
        OnlineTrial {
            id: t.key(),
            ground_truth: Some(t.true_label),
            samples: t.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum OnlineEvent {
    Command {
        trial_id: String,
        label: CommandLabel,
        name: String,
        winning_tally: f64,
    },
    Error {
        trial_id: Option<String>,
        code: String,
        detail: String,
    },
}

pub trait CommandSink {
    fn emit(&mut self, event: &OnlineEvent) -> Result<()>;
}

impl CommandSink for Vec<OnlineEvent> {
    fn emit(&mut self, event: &OnlineEvent) -> Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Short machine-readable code for an error frame.
pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::DimensionMismatch { .. } => "shape",
        Error::NonFinite(_) => "non-finite",
        Error::TrialFormat { .. } => "format",
        Error::Io(_) => "io",
        _ => "invalid",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRecord {
    pub trial_id: String,
    pub label: CommandLabel,
    pub tally: Vec<f64>,
    pub ground_truth: Option<CommandLabel>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub records: Vec<OnlineRecord>,
    pub errors: usize,
    pub n_labeled: usize,
    pub n_correct: usize,
    pub accuracy: Option<f64>,
    pub mean_classification_seconds: Option<f64>,
}

impl OnlineReport {
    pub fn predictions(&self) -> Vec<CommandLabel> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Zeroes wall-clock fields so reports compare byte for byte.
    pub fn without_timing(mut self) -> Self {
        for r in &mut self.records {
            r.seconds = 0.0;
        }
        self.mean_classification_seconds = self.mean_classification_seconds.map(|_| 0.0);
        self
    }

    /// Compute-time base from the measured mean classification time.
    pub fn compute_time_base(&self) -> Option<TimeBase> {
        self.mean_classification_seconds
            .filter(|s| *s > 0.0)
            .map(|s| TimeBase::Compute {
                seconds_per_classification: s,
            })
    }
}

/// Classifies trials in arrival order. Malformed trials and source errors
/// become error events and the session continues; a failing sink ends it.
pub fn run_online_session<I, S>(
    model: &EnsembleModel,
    source: I,
    sink: &mut S,
) -> Result<OnlineReport>
where
    I: IntoIterator<Item = Result<OnlineTrial>>,
    S: CommandSink + ?Sized,
{
    let mut report = OnlineReport::default();
    let mut total_seconds = 0.0;
    for item in source {
        let trial = match item {
            Ok(t) => t,
            Err(e) => {
                report.errors += 1;
                sink.emit(&OnlineEvent::Error {
                    trial_id: None,
                    code: error_code(&e).into(),
                    detail: e.to_string(),
                })?;
                continue;
            }
        };
        let started = Instant::now();
        match ensemble_predict(model, trial.samples.view()) {
            Ok(p) => {
                let seconds = started.elapsed().as_secs_f64();
                total_seconds += seconds;
                sink.emit(&OnlineEvent::Command {
                    trial_id: trial.id.clone(),
                    label: p.label,
                    name: model.stimulus_name(p.label).to_string(),
                    winning_tally: p.winning_tally(),
                })?;
                if let Some(truth) = trial.ground_truth {
                    report.n_labeled += 1;
                    report.n_correct += usize::from(truth == p.label);
                }
                report.records.push(OnlineRecord {
                    trial_id: trial.id,
                    label: p.label,
                    tally: p.tally,
                    ground_truth: trial.ground_truth,
                    seconds,
                });
            }
            Err(e) => {
                report.errors += 1;
                sink.emit(&OnlineEvent::Error {
                    trial_id: Some(trial.id),
                    code: error_code(&e).into(),
                    detail: e.to_string(),
                })?;
            }
        }
    }
    if report.n_labeled > 0 {
        report.accuracy = Some(report.n_correct as f64 / report.n_labeled as f64);
    }
    if !report.records.is_empty() {
        report.mean_classification_seconds = Some(total_seconds / report.records.len() as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{default_stimuli, Provenance};
    use proptest::prelude::*;

    fn fixture(seq: &[usize]) -> Vec<CommandLabel> {
        seq.iter().copied().map(CommandLabel).collect()
    }

    #[test]
    fn offline_schedule_shape() {
        let s = make_offline_schedule(11);
        assert_eq!(s.sessions.len(), 5);
        assert_eq!(s.n_trials(), 125);
        assert!(s.is_offline_layout(3));
        let counts = label_counts(&s.labels(), 3);
        assert_eq!(counts, vec![42, 42, 41]);
        assert_eq!(s, make_offline_schedule(11));
        assert_ne!(s, make_offline_schedule(12));
        s.validate(3).unwrap();
    }

    #[test]
    fn fixture_part_a_validates() {
        validate_part_a(&fixture(&[2, 0, 1, 2, 0, 2, 1, 0, 1, 0, 1, 2]), 3).unwrap();
        assert!(validate_part_a(&fixture(&[2, 0, 1, 2, 0, 2, 1, 0, 1, 0, 1]), 3).is_err());
        assert!(validate_part_a(&fixture(&[0, 0, 0, 0, 0, 2, 1, 0, 1, 0, 1, 2]), 3).is_err());
    }

    #[test]
    fn timeline_arithmetic() {
        let s = make_offline_schedule(0);
        assert_eq!(s.session_seconds(0), 12.0 * 10.0 + 30.0 + 13.0 * 10.0);
        let on = s.trial_onsets(0);
        assert_eq!(on.len(), 25);
        assert_eq!(on[11], 110.0);
        assert_eq!(on[12], 150.0);
        assert_eq!(on[24], 270.0);
    }

    #[test]
    fn test_counts_for_default_split() {
        assert_eq!(stratified_test_counts(&[42, 42, 41], 0.8), vec![9, 8, 8]);
        assert_eq!(stratified_test_counts(&[40, 40, 40], 0.8), vec![8, 8, 8]);
        assert_eq!(stratified_test_counts(&[42, 42, 41], 1.0), vec![0, 0, 0]);
    }

    fn dataset(labels: &[usize]) -> SubjectDataset {
        let spec = RecordingSpec {
            samples_per_trial: 4,
            flicker_seconds: 4.0 / 257.0,
            ..RecordingSpec::default()
        };
        let trials = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| TrialRecording {
                samples: Array2::from_elem((4, 14), i as f64),
                true_label: CommandLabel(l),
                trial_index: i,
                session_index: 0,
                subject_id: "s".into(),
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
    fn split_rejects_singleton_class_and_mixed_subjects() {
        assert!(split_subjectwise_stratified(&dataset(&[0, 0, 1]), 0.8, 0).is_err());
        let mut d = dataset(&[0, 0, 1, 1]);
        d.trials[3].subject_id = "other".into();
        assert!(split_subjectwise_stratified(&d, 0.8, 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            labels in proptest::collection::vec(0usize..3, 6..60),
            f in 0.5f64..1.0,
            seed in any::<u64>(),
        ) {
            let mut labels = labels;
            labels.extend([0, 0, 1, 1, 2, 2]);
            let d = dataset(&labels);
            let (train, test) = split_subjectwise_stratified(&d, f, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), labels.len());
            let n = labels.len();
            prop_assert_eq!(test.len(), n - (n as f64 * f).round() as usize);
            let mut keys: Vec<usize> = train.iter().chain(&test).map(|t| t.trial_index).collect();
            keys.sort();
            prop_assert_eq!(keys, (0..n).collect::<Vec<_>>());
            let again = split_subjectwise_stratified(&d, f, seed).unwrap();
            prop_assert_eq!(again.1, test);
        }
    }
}
