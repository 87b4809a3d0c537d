//! Runs several synthetic subjects and tests whether the ensemble beats
//! each subject's best single variant.
//!
//! cargo run --release --example cohort_significance -- [subjects]

use ssvep_ensemble::cli::{render_cohort, TableFormat};
use ssvep_ensemble::protocol::{
    compare_cohort, make_offline_schedule, run_offline_experiment, ExperimentConfig,
};
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::RecordingSpec;

fn main() -> anyhow::Result<()> {
    let n: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(10);
    let reports = (0..n)
        .map(|seed| {
            let ds = synth_dataset(
                &SubjectProfile::sampled(seed),
                &make_offline_schedule(seed),
                &default_stimuli(),
                &RecordingSpec::default(),
            )?;
            Ok(run_offline_experiment(
                &ds,
                &ExperimentConfig::default().with_seeds(seed, seed),
            )?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cohort = compare_cohort(&reports);
    print!("{}", render_cohort(&cohort, TableFormat::Text));
    for r in &reports {
        if let Some(best) = r.best_variant() {
            println!("  {}: best single variant {}", r.subject_id, best.name);
        }
    }
    Ok(())
}
