//! Trains on clean trials, then injects blinks and head-motion bursts into
//! the test trials and compares how far each variant and the ensemble fall.
//!
//! cargo run --release --example artifact_robustness -- [motion-amplitude]

use ssvep_ensemble::ensemble::{build_ensemble, default_classifiers, default_configs};
use ssvep_ensemble::metrics::TimeBase;
use ssvep_ensemble::preprocess::PreprocessConfig;
use ssvep_ensemble::protocol::{
    evaluate_ensemble, make_offline_schedule, split_subjectwise_stratified,
};
use ssvep_ensemble::synth::{
    inject_artifacts, synth_dataset, trial_rng, ArtifactSpec, SubjectProfile,
};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::RecordingSpec;

fn main() -> anyhow::Result<()> {
    let mut artifacts = ArtifactSpec::default();
    if let Some(a) = std::env::args().nth(1) {
        artifacts.motion_amplitude = a.parse()?;
    }
    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let base = TimeBase::default();
    let mut names = Vec::new();
    let mut drops: Vec<f64> = Vec::new();
    let mut ensemble_drop = 0.0;
    let seeds = 0..5u64;
    for seed in seeds.clone() {
        let ds = synth_dataset(
            &SubjectProfile::moderate(seed),
            &make_offline_schedule(seed),
            &stimuli,
            &spec,
        )?;
        let (train, test) = split_subjectwise_stratified(&ds, 0.8, seed)?;
        let model = build_ensemble(
            &train,
            &spec,
            &stimuli,
            &default_classifiers(seed),
            &default_configs(&PreprocessConfig::default()),
        )?;
        let dirty: Vec<_> = test
            .iter()
            .enumerate()
            .map(|(i, t)| {
                inject_artifacts(t, &artifacts, &spec, &mut trial_rng(seed + 777, i as u64))
            })
            .collect();
        let (v0, e0, _) = evaluate_ensemble(&model, &test, &base)?;
        let (v1, e1, _) = evaluate_ensemble(&model, &dirty, &base)?;
        if names.is_empty() {
            names = v0.iter().map(|v| v.name.clone()).collect();
            drops = vec![0.0; names.len()];
        }
        for (d, (a, b)) in drops.iter_mut().zip(v0.iter().zip(&v1)) {
            *d += a.accuracy - b.accuracy;
        }
        ensemble_drop += e0.accuracy - e1.accuracy;
    }
    let k = seeds.count() as f64;
    println!(
        "mean accuracy drop with blink {} / motion {} artifacts:",
        artifacts.blink_amplitude, artifacts.motion_amplitude
    );
    for (n, d) in names.iter().zip(&drops) {
        println!("  {n:<20} {:>6.1} pp", 100.0 * d / k + 0.0);
    }
    println!("  {:<20} {:>6.1} pp", "ensemble", 100.0 * ensemble_drop / k);
    Ok(())
}
