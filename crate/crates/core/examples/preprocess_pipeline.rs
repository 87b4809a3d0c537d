//! Walks one trial through CAR, channel selection, spectra and band
//! features, then fits PCA and z-scoring on a training set.

use ndarray::Array2;
use ssvep_ensemble::preprocess::{
    band_features, car_filter, pca_fit, power_spectrum, select_channels, zscore_fit, FeatureLayout,
    PreprocessConfig,
};
use ssvep_ensemble::protocol::make_offline_schedule;
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::RecordingSpec;

fn main() -> anyhow::Result<()> {
    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let ds = synth_dataset(
        &SubjectProfile::moderate(2),
        &make_offline_schedule(2),
        &stimuli,
        &spec,
    )?;
    let trial = &ds.trials[0];
    let cfg = PreprocessConfig::default();

    let referenced = car_filter(trial.view())?;
    let worst = referenced
        .rows()
        .into_iter()
        .map(|r| r.sum().abs())
        .fold(0.0, f64::max);
    println!(
        "CAR: {:?} samples, largest per-sample channel sum {worst:.1e}",
        referenced.dim()
    );

    let selected = select_channels(referenced.view(), &spec, &cfg.channels)?;
    let spectrum = power_spectrum(&selected.column(0).to_vec(), spec.sampling_rate_hz)?;
    let peak = (30..=100)
        .max_by(|&a, &b| spectrum.power[a].total_cmp(&spectrum.power[b]))
        .unwrap_or(0);
    println!(
        "spectrum: {} bins at {} Hz, strongest 6-20 Hz bin at {:.1} Hz (true command {} Hz)",
        spectrum.n_bins(),
        spectrum.resolution_hz,
        spectrum.frequency(peak),
        stimuli[trial.true_label.0].frequency_hz
    );

    let layout = FeatureLayout::build(
        &cfg.channels,
        &stimuli,
        &cfg.harmonics,
        cfg.half_width_hz,
        &spec,
    )?;
    for w in &layout.windows {
        println!(
            "  window {} x{}: bins {}..={} around {:.2} Hz",
            stimuli[w.stimulus].name, w.harmonic, w.first_bin, w.last_bin, w.centre_hz
        );
    }
    println!("band features per trial: {}", layout.len());

    let rows: Vec<Vec<f64>> = ds
        .trials
        .iter()
        .map(|t| band_features(t.view(), &spec, true, &layout))
        .collect::<Result<_, _>>()?;
    let matrix = Array2::from_shape_fn((rows.len(), layout.len()), |(i, j)| rows[i][j]);
    let pca = pca_fit(matrix.view(), cfg.pca_variance_threshold)?;
    let kept: f64 = pca.explained_variance.iter().sum();
    println!(
        "PCA: {} -> {} components ({:.1}% of variance)",
        pca.n_features(),
        pca.k(),
        100.0 * kept
    );
    let z = zscore_fit(matrix.view())?;
    println!(
        "z-score: {} features, {} constant",
        z.n_features(),
        z.constant.iter().filter(|c| **c).count()
    );
    Ok(())
}
