//! Builds the eight-variant bank and shows how training-accuracy weights
//! turn per-variant predictions into one command.

use ssvep_ensemble::ensemble::{
    build_ensemble, default_classifiers, default_configs, ensemble_predict, weighted_vote,
};
use ssvep_ensemble::preprocess::PreprocessConfig;
use ssvep_ensemble::protocol::{make_offline_schedule, split_subjectwise_stratified};
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::{CommandLabel, RecordingSpec};

fn main() -> anyhow::Result<()> {
    // the vote on its own: three labels, eight weighted voters
    let preds: Vec<CommandLabel> = [0, 0, 1, 1, 2, 1, 0, 2]
        .into_iter()
        .map(CommandLabel)
        .collect();
    let weights = [0.9, 0.8, 0.7, 0.6, 0.9, 0.5, 0.6, 0.7];
    let vote = weighted_vote(&preds, &weights, 3)?;
    let shown: Vec<String> = vote.tally.iter().map(|t| format!("{t:.2}")).collect();
    println!(
        "hand example: tallies [{}] -> label {}",
        shown.join(" "),
        vote.winner
    );

    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let ds = synth_dataset(
        &SubjectProfile::sampled(4),
        &make_offline_schedule(4),
        &stimuli,
        &spec,
    )?;
    let (train, test) = split_subjectwise_stratified(&ds, 0.8, 4)?;
    let model = build_ensemble(
        &train,
        &spec,
        &stimuli,
        &default_classifiers(4),
        &default_configs(&PreprocessConfig::default()),
    )?;
    println!("\nvariant weights (training accuracy):");
    for (name, w) in model.variant_names().iter().zip(&model.weights) {
        println!("  {name:<20} {w:.3}");
    }
    println!("\nfirst five test trials:");
    for t in test.iter().take(5) {
        let p = ensemble_predict(&model, t.view())?;
        let votes: Vec<String> = p.per_variant.iter().map(|l| l.to_string()).collect();
        let tally: Vec<String> = p.tally.iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "  {}: variants [{}] tallies [{}] -> {} (true {})",
            t.key(),
            votes.join(" "),
            tally.join(" "),
            model.stimulus_name(p.label),
            model.stimulus_name(t.true_label)
        );
    }
    Ok(())
}
