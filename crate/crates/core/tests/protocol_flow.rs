//! Slicing, experiments and the online runner on synthetic subjects.

use ndarray::{concatenate, s, Array2, Axis};

use ssvep_ensemble::ensemble::{build_ensemble, default_classifiers, default_configs};
use ssvep_ensemble::metrics::TimeBase;
use ssvep_ensemble::preprocess::PreprocessConfig;
use ssvep_ensemble::protocol::{
    make_offline_schedule, report_for, run_offline_experiment, run_online_session, slice_recording,
    split_subjectwise_stratified, ExperimentConfig, OnlineEvent, OnlineTrial, ProtocolSchedule,
    SessionPlan,
};
use ssvep_ensemble::synth::{synth_dataset, synth_session_stream, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::{CommandLabel, Error, RecordingSpec, SubjectDataset};

fn part_a_only() -> ProtocolSchedule {
    let labels = (0..12).map(|i| CommandLabel(i % 3)).collect();
    ProtocolSchedule::single(labels)
}

#[test]
fn part_a_stream_slices_into_twelve_trials() {
    let spec = RecordingSpec::default();
    let schedule = part_a_only();
    let (stream, embedded) = synth_session_stream(
        &SubjectProfile::moderate(1),
        &schedule.sessions[0],
        &default_stimuli(),
        &spec,
        schedule.inter_part_rest_seconds,
    )
    .unwrap();
    // 12 x (5 s flicker + 5 s rest) at 257 Hz
    assert_eq!(stream.nrows(), 12 * 2570);
    let trials = slice_recording(stream.view(), &schedule, 0, &spec, "s01").unwrap();
    assert_eq!(trials.len(), 12);
    for (i, (t, e)) in trials.iter().zip(&embedded).enumerate() {
        assert_eq!(t.n_samples(), 1285);
        assert_eq!(t.samples, e.samples);
        assert_eq!(t.true_label, CommandLabel(i % 3));
    }

    let short = stream.slice(s![..stream.nrows() - 257, ..]);
    assert!(matches!(
        slice_recording(short, &schedule, 0, &spec, "s01"),
        Err(Error::StreamTooShort { expected, actual }) if expected == 12 * 2570 && actual == 11 * 2570 + 2313
    ));
}

#[test]
fn slices_and_rests_reassemble_the_stream() {
    let spec = RecordingSpec::default();
    let schedule = make_offline_schedule(2);
    let plan: &SessionPlan = &schedule.sessions[0];
    let (stream, _) = synth_session_stream(
        &SubjectProfile::moderate(2),
        plan,
        &default_stimuli(),
        &spec,
        30.0,
    )
    .unwrap();
    let trials = slice_recording(stream.view(), &schedule, 0, &spec, "s02").unwrap();
    let onsets = schedule.trial_onsets(0);
    let mut pieces: Vec<Array2<f64>> = Vec::new();
    let mut at = 0;
    for (t, onset) in trials.iter().zip(onsets) {
        let start = (onset * 257.0).round() as usize;
        pieces.push(stream.slice(s![at..start, ..]).to_owned());
        pieces.push(t.samples.clone());
        at = start + 1285;
    }
    pieces.push(stream.slice(s![at.., ..]).to_owned());
    let views: Vec<_> = pieces.iter().map(|p| p.view()).collect();
    assert_eq!(concatenate(Axis(0), &views).unwrap(), stream);
    assert_eq!(
        stream.nrows(),
        (schedule.session_seconds(0) * 257.0).round() as usize
    );
}

fn subject(profile: &SubjectProfile, seed: u64) -> SubjectDataset {
    synth_dataset(
        profile,
        &make_offline_schedule(seed),
        &default_stimuli(),
        &RecordingSpec::default(),
    )
    .unwrap()
}

#[test]
fn pure_noise_sits_at_chance() {
    let acc: Vec<f64> = (0..4)
        .map(|seed| {
            let ds = subject(&SubjectProfile::pure_noise(seed), seed);
            run_offline_experiment(&ds, &ExperimentConfig::default().with_seeds(seed, seed))
                .unwrap()
                .ensemble
                .accuracy
        })
        .collect();
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    assert!((mean - 1.0 / 3.0).abs() <= 0.15, "{acc:?}");
}

#[test]
fn report_bookkeeping_holds_on_a_noisy_subject() {
    for seed in [3u64, 4] {
        let ds = subject(&SubjectProfile::sampled(seed), seed);
        let r = run_offline_experiment(&ds, &ExperimentConfig::default().with_seeds(seed, seed))
            .unwrap();
        assert_eq!((r.n_train, r.n_test), (100, 25));
        assert_eq!(r.variants.len(), 8);
        assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 25);
        let diagonal: usize = (0..3).map(|i| r.confusion[i][i]).sum();
        assert_eq!(diagonal as f64 / 25.0, r.ensemble.accuracy);
        assert!(r.ensemble.accuracy >= r.worst_variant().unwrap().accuracy);
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(
            serde_json::from_str::<ssvep_ensemble::protocol::ExperimentReport>(&text).unwrap(),
            r
        );
    }
}

#[test]
fn online_runner_handles_empty_and_malformed_input() {
    let ds = subject(&SubjectProfile::clean(5), 5);
    let (train, test) = split_subjectwise_stratified(&ds, 0.8, 5).unwrap();
    let model = build_ensemble(
        &train,
        &ds.spec,
        &ds.stimuli,
        &default_classifiers(5),
        &default_configs(&PreprocessConfig::default()),
    )
    .unwrap();

    let mut events = Vec::new();
    let empty = run_online_session(&model, std::iter::empty(), &mut events).unwrap();
    assert!(events.is_empty());
    assert_eq!(empty.accuracy, None);
    assert_eq!(empty.compute_time_base(), None);

    let mut source: Vec<_> = test
        .iter()
        .take(10)
        .cloned()
        .map(|t| Ok(OnlineTrial::from(t)))
        .collect();
    let mut broken = OnlineTrial::from(test[4].clone());
    broken.samples[[10, 3]] = f64::NAN;
    source[4] = Ok(broken);
    let report = run_online_session(&model, source, &mut events).unwrap();
    assert_eq!(events.len(), 10);
    assert!(matches!(&events[4], OnlineEvent::Error { code, .. } if code == "non-finite"));
    assert_eq!(report.records.len(), 9);
    assert_eq!(report.errors, 1);
    assert_eq!(report.n_labeled, 9);
    assert!(matches!(
        report.compute_time_base(),
        Some(TimeBase::Compute { .. })
    ));

    // the offline report on the same trials agrees with the online records
    let offline = report_for(&model, &ds, train.len(), &test[..4], &TimeBase::default()).unwrap();
    let online_first: Vec<CommandLabel> = report.records[..4].iter().map(|r| r.label).collect();
    let offline_first: Vec<CommandLabel> = offline.trials.iter().map(|t| t.predicted).collect();
    assert_eq!(online_first, offline_first);
}
