//! Statistical and structural properties of the synthetic subject.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssvep_ensemble::preprocess::power_spectrum;
use ssvep_ensemble::protocol::{make_offline_schedule, ProtocolSchedule};
use ssvep_ensemble::synth::{
    apply_artifact_events, pink_noise, synth_dataset, synth_trial, ArtifactEvent, ArtifactKind,
    ArtifactSpec, SubjectProfile,
};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::{CommandLabel, RecordingSpec, TrialRecording};

fn column(t: &TrialRecording, spec: &RecordingSpec, name: &str) -> Vec<f64> {
    t.samples.column(spec.channel_index(name).unwrap()).to_vec()
}

/// Least-squares slope of log power against log frequency over [lo, hi].
fn loglog_slope(power: &[f64], resolution: f64, lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = power
        .iter()
        .enumerate()
        .filter(|(k, _)| (lo..=hi).contains(&(*k as f64 * resolution)))
        .map(|(k, p)| ((k as f64 * resolution).ln(), p.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn pink_noise_falls_off_as_one_over_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seg = 1024;
    let mut avg = vec![0.0; seg / 2 + 1];
    for _ in 0..64 {
        let x = pink_noise(seg, &mut rng);
        let s = power_spectrum(&x, 257.0).unwrap();
        avg.iter_mut().zip(&s.power).for_each(|(a, p)| *a += p);
    }
    let slope = loglog_slope(&avg, 257.0 / seg as f64, 1.0, 40.0);
    assert!((-1.3..=-0.7).contains(&slope), "slope {slope}");
}

/// Share of O1 power in the target bins (first harmonic, +-0.5 Hz).
fn target_share(profile: &SubjectProfile, trials: usize) -> f64 {
    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let mut share = 0.0;
    for i in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let t = synth_trial(profile, CommandLabel(0), &stimuli, &spec, &mut rng).unwrap();
        let s = power_spectrum(&column(&t, &spec, "O1"), spec.sampling_rate_hz).unwrap();
        let total: f64 = s.power[1..].iter().sum();
        share += s.power[58..=62].iter().sum::<f64>() / total;
    }
    share / trials as f64
}

#[test]
fn white_noise_dilutes_the_target_band() {
    let mut last = f64::INFINITY;
    for level in [0.0, 1.0, 3.0, 9.0] {
        let p = SubjectProfile {
            noise_white_level: level,
            ..SubjectProfile::clean(2)
        };
        let share = target_share(&p, 10);
        assert!(share < last, "level {level}: {share} !< {last}");
        last = share;
    }
}

#[test]
fn blink_adds_low_frequency_power_frontally() {
    let spec = RecordingSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clean = synth_trial(
        &SubjectProfile::moderate(3),
        CommandLabel(1),
        &default_stimuli(),
        &spec,
        &mut rng,
    )
    .unwrap();
    let events = [ArtifactEvent {
        kind: ArtifactKind::Blink,
        onset_s: 2.0,
    }];
    let blinked = apply_artifact_events(&clean, &ArtifactSpec::default(), &spec, &events, &mut rng);
    let low = |t: &TrialRecording, ch: &str| {
        let s = power_spectrum(&column(t, &spec, ch), spec.sampling_rate_hz).unwrap();
        // bins 1..=15 cover 0.2..3 Hz
        s.power[1..=15].iter().sum::<f64>()
    };
    assert!(low(&blinked, "AF3") > 2.0 * low(&clean, "AF3"));
    assert!(low(&blinked, "AF3") - low(&clean, "AF3") > low(&blinked, "O1") - low(&clean, "O1"));
    assert_eq!(blinked.true_label, clean.true_label);
    assert_eq!(blinked.samples.dim(), clean.samples.dim());
}

#[test]
fn seeds_change_samples_but_not_the_schedule() {
    let spec = RecordingSpec::default();
    let schedule = make_offline_schedule(4);
    let a = synth_dataset(
        &SubjectProfile::moderate(1),
        &schedule,
        &default_stimuli(),
        &spec,
    )
    .unwrap();
    let b = synth_dataset(
        &SubjectProfile::moderate(2),
        &schedule,
        &default_stimuli(),
        &spec,
    )
    .unwrap();
    let again = synth_dataset(
        &SubjectProfile::moderate(1),
        &schedule,
        &default_stimuli(),
        &spec,
    )
    .unwrap();
    assert_eq!(a.labels(), b.labels());
    assert_ne!(a.trials[0].samples, b.trials[0].samples);
    assert_eq!(a.trials, again.trials);
}

#[test]
fn one_slot_schedule_gives_one_trial() {
    let spec = RecordingSpec::default();
    let schedule = ProtocolSchedule::single(vec![CommandLabel(2)]);
    let ds = synth_dataset(
        &SubjectProfile::clean(5),
        &schedule,
        &default_stimuli(),
        &spec,
    )
    .unwrap();
    assert_eq!(ds.trials.len(), 1);
    assert_eq!(ds.trials[0].true_label, CommandLabel(2));
    assert_eq!(ds.trials[0].n_samples(), 1285);
    assert_eq!(ds.trials[0].n_channels(), 14);
}

#[test]
fn sampled_profiles_vary_but_stay_valid() {
    let spec = RecordingSpec::default();
    let a = SubjectProfile::sampled(1);
    let b = SubjectProfile::sampled(2);
    assert_ne!(a.gain("O1"), b.gain("O1"));
    for p in [&a, &b] {
        p.validate(&spec).unwrap();
        assert!(p.gain("O1") > p.gain("P7"));
    }
}
