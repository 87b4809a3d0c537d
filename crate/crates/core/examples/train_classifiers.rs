//! Fits the linear SVM, polynomial SVM and random forest on the same
//! band features and compares held-out accuracy.

use ssvep_ensemble::classifiers::{predict_batch, train, TrainableSpec};
use ssvep_ensemble::metrics::accuracy;
use ssvep_ensemble::preprocess::{FittedPreprocess, PreprocessConfig};
use ssvep_ensemble::protocol::{make_offline_schedule, split_subjectwise_stratified};
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::{CommandLabel, RecordingSpec};

fn main() -> anyhow::Result<()> {
    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let ds = synth_dataset(
        &SubjectProfile::sampled(3),
        &make_offline_schedule(3),
        &stimuli,
        &spec,
    )?;
    let (train_set, test_set) = split_subjectwise_stratified(&ds, 0.8, 3)?;

    let cfg = PreprocessConfig::default().with_flags(true, false);
    let (pre, x_train) =
        FittedPreprocess::fit(&cfg, &spec, &stimuli, train_set.iter().map(|t| t.view()))?;
    let y_train: Vec<CommandLabel> = train_set.iter().map(|t| t.true_label).collect();
    let rows: Vec<Vec<f64>> = test_set
        .iter()
        .map(|t| pre.transform(t.view(), &spec))
        .collect::<Result<_, _>>()?;
    let x_test =
        ndarray::Array2::from_shape_fn((rows.len(), pre.output_len()), |(i, j)| rows[i][j]);
    let y_test: Vec<CommandLabel> = test_set.iter().map(|t| t.true_label).collect();

    println!(
        "{} training and {} test trials, {} features",
        y_train.len(),
        y_test.len(),
        pre.output_len()
    );
    for clf in [
        TrainableSpec::svm_linear(),
        TrainableSpec::svm_poly(),
        TrainableSpec::random_forest(3),
    ] {
        let model = train(&clf, x_train.view(), &y_train)?;
        let test_acc = accuracy(&predict_batch(&model, x_test.view())?, &y_test)?;
        println!(
            "  {:<11} train {:>5.1}%  test {:>5.1}%",
            clf.kind().tag(),
            100.0 * model.training_accuracy,
            100.0 * test_acc
        );
    }
    Ok(())
}
