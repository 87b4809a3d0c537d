//! Full offline run for one subject: 100/25 stratified split, eight
//! variants plus the ensemble, confusion matrix and significance.
//!
//! cargo run --release --example offline_experiment -- [seed] [clean|moderate|sampled|noise]

use ssvep_ensemble::cli::{render_experiment, TableFormat};
use ssvep_ensemble::protocol::{make_offline_schedule, run_offline_experiment, ExperimentConfig};
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::RecordingSpec;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let profile = match args.next().as_deref().unwrap_or("sampled") {
        "clean" => SubjectProfile::clean(seed),
        "moderate" => SubjectProfile::moderate(seed),
        "noise" => SubjectProfile::pure_noise(seed),
        _ => SubjectProfile::sampled(seed),
    };
    let ds = synth_dataset(
        &profile,
        &make_offline_schedule(seed),
        &default_stimuli(),
        &RecordingSpec::default(),
    )?;
    let started = std::time::Instant::now();
    let report = run_offline_experiment(&ds, &ExperimentConfig::default().with_seeds(seed, seed))?;
    print!("{}", render_experiment(&report, TableFormat::Text));
    println!(
        "trained and scored in {:.2} s",
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
