//! Per-trial preprocessing: common average reference, channel selection,
//! FFT power spectra, harmonic-window band features, PCA and z-scoring.
//!
//! A trial flows through [`FittedPreprocess::transform`] in this order:
//!
//! 1. common average reference over every recorded electrode (optional),
//! 2. channel selection,
//! 3. per-channel power spectrum of the whole flicker window,
//! 4. band features: the bins within `±half_width_hz` of every stimulus
//!    frequency and each configured harmonic,
//! 5. PCA projection (optional),
//! 6. z-score.
//!
//! The CAR mean is taken over the full headset before selecting channels,
//! so an occipital-only view still has the common mode of all electrodes
//! removed.

use std::cell::RefCell;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{RecordingSpec, StimulusSpec, OCCIPITAL_CHANNELS};

/// Slack used when deciding whether a bin centre lies on a window edge.
const BIN_EDGE_EPS: f64 = 1e-9;

/// Restricts (and reorders) the columns of `samples` to `names`.
pub fn select_channels(
    samples: ArrayView2<'_, f64>,
    spec: &RecordingSpec,
    names: &[String],
) -> Result<Array2<f64>> {
    let idx = names
        .iter()
        .map(|n| {
            spec.channel_index(n)
                .ok_or_else(|| Error::UnknownChannel(n.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.ncols() != spec.n_channels() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_channels(),
            actual: samples.ncols(),
        });
    }
    Ok(samples.select(Axis(1), &idx))
}

/// Subtracts the across-channel mean from every sample:
/// `out[t][i] = in[t][i] - (1/n) * sum_j in[t][j]`.
pub fn car_filter(samples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = samples.ncols();
    if n < 2 {
        return Err(Error::TooFewChannels(n));
    }
    let mut out = samples.to_owned();
    for mut row in out.rows_mut() {
        let mean = row.sum() / n as f64;
        row.mapv_inplace(|v| v - mean);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `|X[k]|^2` for `k = 0..=L/2`.
    pub power: Vec<f64>,
    pub resolution_hz: f64,
}

impl Spectrum {
    pub fn n_bins(&self) -> usize {
        self.power.len()
    }

    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution_hz
    }

    /// Index of the largest bin, ignoring DC.
    pub fn peak_bin(&self) -> usize {
        self.power
            .iter()
            .enumerate()
            .skip(1)
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                if p > best.1 {
                    (i, p)
                } else {
                    best
                }
            })
            .0
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

/// One-sided, unnormalised power spectrum of a real series with a
/// rectangular window. Bin `k` sits at `k * sampling_rate / L`.
pub fn power_spectrum(signal: &[f64], sampling_rate_hz: f64) -> Result<Spectrum> {
    let len = signal.len();
    if len < 2 {
        return Err(Error::invalid(format!(
            "power spectrum needs at least 2 samples, got {len}"
        )));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    plan(len).process(&mut buf);
    let power = buf[..=len / 2].iter().map(|c| c.norm_sqr()).collect();
    Ok(Spectrum {
        power,
        resolution_hz: sampling_rate_hz / len as f64,
    })
}

/// Inclusive bin range whose centres lie in `[centre - half_width, centre + half_width]`.
pub fn window_bins(
    resolution_hz: f64,
    centre_hz: f64,
    half_width_hz: f64,
) -> std::ops::RangeInclusive<usize> {
    let lo = ((centre_hz - half_width_hz) / resolution_hz - BIN_EDGE_EPS)
        .ceil()
        .max(0.0) as usize;
    let hi = ((centre_hz + half_width_hz) / resolution_hz + BIN_EDGE_EPS).floor() as usize;
    lo..=hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandWindow {
    pub stimulus: usize,
    pub harmonic: u32,
    pub centre_hz: f64,
    pub first_bin: usize,
    pub last_bin: usize,
}

impl BandWindow {
    pub fn len(&self) -> usize {
        self.last_bin + 1 - self.first_bin
    }

    pub fn is_empty(&self) -> bool {
        self.last_bin < self.first_bin
    }
}

/// Ordering of band features: channel, then stimulus, then harmonic, then bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub channels: Vec<String>,
    pub windows: Vec<BandWindow>,
}

impl FeatureLayout {
    pub fn build(
        channels: &[String],
        stimuli: &[StimulusSpec],
        harmonics: &[u32],
        half_width_hz: f64,
        spec: &RecordingSpec,
    ) -> Result<Self> {
        if harmonics.is_empty() {
            return Err(Error::invalid("at least one harmonic is required"));
        }
        let nyquist = spec.nyquist_hz();
        let resolution = spec.resolution_hz();
        let mut windows = Vec::with_capacity(stimuli.len() * harmonics.len());
        for (s, stim) in stimuli.iter().enumerate() {
            for &h in harmonics {
                if h == 0 {
                    return Err(Error::invalid("harmonic multipliers start at 1"));
                }
                let centre = h as f64 * stim.frequency_hz;
                if centre + half_width_hz >= nyquist {
                    return Err(Error::AboveNyquist {
                        what: format!("window for `{}` harmonic {h}", stim.name),
                        freq_hz: centre + half_width_hz,
                        nyquist_hz: nyquist,
                    });
                }
                let bins = window_bins(resolution, centre, half_width_hz);
                if bins.is_empty() {
                    return Err(Error::invalid(format!(
                        "window around {centre} Hz contains no bins at {resolution} Hz resolution"
                    )));
                }
                windows.push(BandWindow {
                    stimulus: s,
                    harmonic: h,
                    centre_hz: centre,
                    first_bin: *bins.start(),
                    last_bin: *bins.end(),
                });
            }
        }
        Ok(FeatureLayout {
            channels: channels.to_vec(),
            windows,
        })
    }

    pub fn bins_per_channel(&self) -> usize {
        self.windows.iter().map(BandWindow::len).sum()
    }

    pub fn len(&self) -> usize {
        self.channels.len() * self.bins_per_channel()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: FeatureLayout,
}

/// Concatenates the windowed power bins of each channel's spectrum in
/// layout order.
pub fn extract_band_features(
    spectra: &[Spectrum],
    layout: &FeatureLayout,
) -> Result<FeatureVector> {
    if spectra.len() != layout.channels.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.channels.len(),
            actual: spectra.len(),
        });
    }
    let mut values = Vec::with_capacity(layout.len());
    for spectrum in spectra {
        for w in &layout.windows {
            if w.last_bin >= spectrum.n_bins() {
                return Err(Error::AboveNyquist {
                    what: format!("bin {}", w.last_bin),
                    freq_hz: spectrum.frequency(w.last_bin),
                    nyquist_hz: spectrum.frequency(spectrum.n_bins() - 1),
                });
            }
            values.extend_from_slice(&spectrum.power[w.first_bin..=w.last_bin]);
        }
    }
    Ok(FeatureVector {
        values,
        layout: layout.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x n_features`, rows orthonormal, ordered by decreasing variance.
    pub components: Array2<f64>,
    /// Fraction of total variance per retained component.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Centre `x` and project it onto the retained components.
    pub fn transform(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        let centred: Array1<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self.components.dot(&centred))
    }

    /// Maps projected coordinates back into feature space.
    pub fn inverse_transform(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if z.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: z.len(),
            });
        }
        let mut x = self.components.t().dot(&z);
        x.iter_mut().zip(&self.mean).for_each(|(v, m)| *v += m);
        Ok(x)
    }

    /// Keep only the first `k` components.
    pub fn truncated(&self, k: usize) -> PcaModel {
        let k = k.min(self.k());
        PcaModel {
            mean: self.mean.clone(),
            components: self.components.slice(ndarray::s![..k, ..]).to_owned(),
            explained_variance: self.explained_variance[..k].to_vec(),
        }
    }
}

/// Fits PCA on the rows of `data` and keeps the fewest components whose
/// cumulative explained variance reaches `variance_threshold`, capped at
/// `min(rows - 1, features)`.
pub fn pca_fit(data: ArrayView2<'_, f64>, variance_threshold: f64) -> Result<PcaModel> {
    let (rows, cols) = data.dim();
    if rows < 2 {
        return Err(Error::invalid(format!(
            "PCA needs at least 2 rows, got {rows}"
        )));
    }
    if cols == 0 {
        return Err(Error::invalid("PCA needs at least one feature"));
    }
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "variance threshold {variance_threshold} outside (0, 1]"
        )));
    }
    let mean = data.mean_axis(Axis(0)).expect("rows > 0");
    let centred = &data - &mean;
    let cov = centred.t().dot(&centred) / (rows - 1) as f64;

    let sym = DMatrix::from_fn(cols, cols, |i, j| cov[[i, j]]);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    let scale = cov.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if total <= 1e-12 * scale || total == 0.0 {
        return Err(Error::Degenerate(
            "PCA input has zero variance (k = 0)".into(),
        ));
    }
    let fractions: Vec<f64> = values.iter().map(|v| v / total).collect();

    let cap = (rows - 1).min(cols);
    let mut k = 0;
    let mut cumulative = 0.0;
    while k < cap {
        cumulative += fractions[k];
        k += 1;
        if cumulative >= variance_threshold - 1e-12 {
            break;
        }
    }

    let mut components = Array2::zeros((k, cols));
    for (r, &src) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(src);
        // Sign convention: largest-magnitude loading is positive.
        let pivot = v
            .iter()
            .fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for c in 0..cols {
            components[[r, c]] = sign * v[c];
        }
    }
    Ok(PcaModel {
        mean: mean.to_vec(),
        components,
        explained_variance: fractions[..k].to_vec(),
    })
}

pub fn pca_transform(model: &PcaModel, features: &[f64]) -> Result<Vec<f64>> {
    model
        .transform(ArrayView1::from(features))
        .map(|a| a.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreModel {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose training spread is numerically zero; they map to 0.
    pub constant: Vec<bool>,
}

impl ZScoreModel {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(i, v)| {
                if self.constant[i] {
                    0.0
                } else {
                    (v - self.mean[i]) / self.std[i]
                }
            })
            .collect())
    }
}

/// Per-feature mean and population standard deviation.
pub fn zscore_fit(data: ArrayView2<'_, f64>) -> Result<ZScoreModel> {
    let rows = data.nrows();
    if rows < 2 {
        return Err(Error::invalid(format!(
            "z-score fit needs at least 2 rows, got {rows}"
        )));
    }
    let mean = data.mean_axis(Axis(0)).expect("rows > 0");
    let std = data.std_axis(Axis(0), 0.0);
    let constant = std
        .iter()
        .zip(mean.iter())
        .map(|(s, m)| *s <= 1e-12 * m.abs().max(f64::MIN_POSITIVE) || *s == 0.0)
        .collect();
    Ok(ZScoreModel {
        mean: mean.to_vec(),
        std: std.to_vec(),
        constant,
    })
}

pub fn zscore_apply(model: &ZScoreModel, features: &[f64]) -> Result<Vec<f64>> {
    model.apply(features)
}

/// One preprocessing configuration of the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub use_car: bool,
    pub use_pca: bool,
    pub channels: Vec<String>,
    pub harmonics: Vec<u32>,
    pub half_width_hz: f64,
    pub pca_variance_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            use_car: false,
            use_pca: false,
            channels: OCCIPITAL_CHANNELS.iter().map(|s| s.to_string()).collect(),
            harmonics: vec![1, 2],
            half_width_hz: 0.5,
            pca_variance_threshold: 0.95,
        }
    }
}

impl PreprocessConfig {
    pub fn with_flags(mut self, use_car: bool, use_pca: bool) -> Self {
        self.use_car = use_car;
        self.use_pca = use_pca;
        self
    }

    /// Short tag such as `car+pca` or `raw`.
    pub fn tag(&self) -> &'static str {
        match (self.use_car, self.use_pca) {
            (true, true) => "car+pca",
            (true, false) => "car",
            (false, true) => "pca",
            (false, false) => "raw",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::invalid("channel set must not be empty"));
        }
        if self.half_width_hz.is_nan() || self.half_width_hz <= 0.0 {
            return Err(Error::invalid("half_width_hz must be positive"));
        }
        Ok(())
    }
}

/// Stages 1–4: spatial filter, selection, spectra, band features.
pub fn band_features(
    samples: ArrayView2<'_, f64>,
    spec: &RecordingSpec,
    use_car: bool,
    layout: &FeatureLayout,
) -> Result<Vec<f64>> {
    if samples.nrows() != spec.samples_per_trial {
        return Err(Error::DimensionMismatch {
            expected: spec.samples_per_trial,
            actual: samples.nrows(),
        });
    }
    let referenced;
    let view = if use_car {
        referenced = car_filter(samples)?;
        referenced.view()
    } else {
        samples
    };
    let selected = select_channels(view, spec, &layout.channels)?;
    let spectra = selected
        .columns()
        .into_iter()
        .map(|col| power_spectrum(&col.to_vec(), spec.sampling_rate_hz))
        .collect::<Result<Vec<_>>>()?;
    Ok(extract_band_features(&spectra, layout)?.values)
}

/// Preprocessing fitted on a training set for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocess {
    pub config: PreprocessConfig,
    pub layout: FeatureLayout,
    pub pca: Option<PcaModel>,
    pub zscore: ZScoreModel,
    /// PCA was requested but the data left no variance, so it was skipped.
    pub pca_degenerate: bool,
}

impl FittedPreprocess {
    /// Fits PCA (when enabled) and z-score on `trials`, returning the
    /// fitted transform and the transformed training matrix.
    pub fn fit<'a>(
        config: &PreprocessConfig,
        spec: &RecordingSpec,
        stimuli: &[StimulusSpec],
        trials: impl IntoIterator<Item = ArrayView2<'a, f64>>,
    ) -> Result<(Self, Array2<f64>)> {
        config.validate()?;
        let layout = FeatureLayout::build(
            &config.channels,
            stimuli,
            &config.harmonics,
            config.half_width_hz,
            spec,
        )?;
        let rows = trials
            .into_iter()
            .map(|t| band_features(t, spec, config.use_car, &layout))
            .collect::<Result<Vec<_>>>()?;
        let band = rows_to_matrix(&rows, layout.len())?;

        let (pca, pca_degenerate, reduced) = if config.use_pca {
            match pca_fit(band.view(), config.pca_variance_threshold) {
                Ok(model) => {
                    let reduced = project_rows(&model, band.view())?;
                    (Some(model), false, reduced)
                }
                Err(Error::Degenerate(msg)) => {
                    log::warn!("PCA skipped for `{}` variant: {msg}", config.tag());
                    (None, true, band)
                }
                Err(e) => return Err(e),
            }
        } else {
            (None, false, band)
        };

        let zscore = zscore_fit(reduced.view())?;
        let mut out = reduced;
        for mut row in out.rows_mut() {
            let z = zscore.apply(row.as_slice().expect("standard layout"))?;
            row.assign(&ArrayView1::from(&z));
        }
        Ok((
            FittedPreprocess {
                config: config.clone(),
                layout,
                pca,
                zscore,
                pca_degenerate,
            },
            out,
        ))
    }

    pub fn output_len(&self) -> usize {
        self.zscore.n_features()
    }

    /// Runs the full chain on one trial.
    pub fn transform(
        &self,
        samples: ArrayView2<'_, f64>,
        spec: &RecordingSpec,
    ) -> Result<Vec<f64>> {
        let band = band_features(samples, spec, self.config.use_car, &self.layout)?;
        let reduced = match &self.pca {
            Some(pca) => pca_transform(pca, &band)?,
            None => band,
        };
        self.zscore.apply(&reduced)
    }
}

/// Free-function form of [`FittedPreprocess::transform`].
pub fn preprocess_trial(
    samples: ArrayView2<'_, f64>,
    spec: &RecordingSpec,
    fitted: &FittedPreprocess,
) -> Result<Vec<f64>> {
    fitted.transform(samples, spec)
}

fn project_rows(model: &PcaModel, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((data.nrows(), model.k()));
    for (i, row) in data.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&model.transform(row)?);
    }
    Ok(out)
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: r.len(),
            });
        }
        out.row_mut(i).assign(&ArrayView1::from(r));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::default_stimuli;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-10.0..10.0))
    }

    #[test]
    fn car_hand_example() {
        let out = car_filter(arr2(&[[1.0, 2.0, 3.0]]).view()).unwrap();
        assert_eq!(out, arr2(&[[-1.0, 0.0, 1.0]]));
        let flat = car_filter(Array2::from_elem((4, 5), 7.5).view()).unwrap();
        assert!(flat.iter().all(|&v| v == 0.0));
        assert!(matches!(
            car_filter(Array2::zeros((10, 1)).view()),
            Err(Error::TooFewChannels(1))
        ));
    }

    #[test]
    fn select_channels_cases() {
        let spec = RecordingSpec::default();
        let samples =
            Array2::from_shape_fn((spec.samples_per_trial, 14), |(r, c)| (r * 14 + c) as f64);
        let occ: Vec<String> = vec!["O1".into(), "O2".into()];
        let sel = select_channels(samples.view(), &spec, &occ).unwrap();
        assert_eq!(sel.dim(), (1285, 2));
        assert_eq!(sel.column(0), samples.column(6));
        assert_eq!(sel.column(1), samples.column(7));
        let all = select_channels(samples.view(), &spec, &spec.channels).unwrap();
        assert_eq!(all, samples);
        let err = select_channels(samples.view(), &spec, &["XX".to_string()]).unwrap_err();
        assert!(err.to_string().contains("XX"));
    }

    #[test]
    fn spectrum_defaults() {
        let spec = RecordingSpec::default();
        let sig: Vec<f64> = (0..1285)
            .map(|t| (2.0 * std::f64::consts::PI * 12.0 * t as f64 / 257.0).sin())
            .collect();
        let s = power_spectrum(&sig, 257.0).unwrap();
        assert_eq!(s.resolution_hz, 0.2);
        assert_eq!(s.n_bins(), 643);
        assert_eq!(s.peak_bin(), 60);
        assert_eq!(spec.resolution_hz(), s.resolution_hz);
        let zero = power_spectrum(&[0.0; 16], 8.0).unwrap();
        assert!(zero.power.iter().all(|&p| p == 0.0));
        assert!(matches!(
            power_spectrum(&[0.0, f64::INFINITY], 8.0),
            Err(Error::NonFinite(1))
        ));
        assert!(power_spectrum(&[1.0], 8.0).is_err());
    }

    #[test]
    fn default_window_bins() {
        assert_eq!(window_bins(0.2, 12.0, 0.5), 58..=62);
        assert_eq!(window_bins(0.2, 10.0, 0.5), 48..=52);
        assert_eq!(window_bins(0.2, 8.57, 0.5), 41..=45);
        assert_eq!(window_bins(0.2, 24.0, 0.5), 118..=122);
        assert_eq!(window_bins(0.2, 17.14, 0.5), 84..=88);
        // edges exactly on bin centres are inside the closed window
        assert_eq!(window_bins(0.25, 10.0, 0.5), 38..=42);
    }

    #[test]
    fn default_layout_has_sixty_features() {
        let spec = RecordingSpec::default();
        let cfg = PreprocessConfig::default();
        let layout = FeatureLayout::build(
            &cfg.channels,
            &default_stimuli(),
            &cfg.harmonics,
            0.5,
            &spec,
        )
        .unwrap();
        assert!(layout.windows.iter().all(|w| w.len() == 5));
        assert_eq!(layout.len(), 2 * 3 * 2 * 5);
        let all =
            FeatureLayout::build(&spec.channels, &default_stimuli(), &[1, 2], 0.5, &spec).unwrap();
        assert_eq!(all.len(), 420);
    }

    #[test]
    fn layout_rejects_window_past_nyquist() {
        let spec = RecordingSpec::default();
        let err = FeatureLayout::build(&spec.channels, &default_stimuli(), &[1, 99], 0.5, &spec)
            .unwrap_err();
        assert!(matches!(err, Error::AboveNyquist { .. }));
        let stim = vec![
            StimulusSpec::new(0, "a", 64.0),
            StimulusSpec::new(1, "b", 10.0),
        ];
        assert!(FeatureLayout::build(&spec.channels, &stim, &[2], 0.4, &spec).is_ok());
        // 128 + 0.5 lands exactly on Nyquist
        assert!(FeatureLayout::build(&spec.channels, &stim, &[2], 0.5, &spec).is_err());
    }

    #[test]
    fn pca_axis_aligned() {
        let data = Array2::from_shape_fn((6, 3), |(r, c)| if c == 0 { r as f64 } else { 1.0 });
        let m = pca_fit(data.view(), 0.95).unwrap();
        assert_eq!(m.k(), 1);
        assert_abs_diff_eq!(m.components[[0, 0]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.components[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.explained_variance[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pca_full_retention_and_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wide = random_matrix(&mut rng, 5, 8);
        assert_eq!(pca_fit(wide.view(), 1.0).unwrap().k(), 4);
        let tall = random_matrix(&mut rng, 20, 4);
        assert_eq!(pca_fit(tall.view(), 1.0).unwrap().k(), 4);
        let flat = Array2::from_elem((5, 3), 2.0);
        assert!(matches!(
            pca_fit(flat.view(), 0.95),
            Err(Error::Degenerate(_))
        ));
        assert!(pca_fit(random_matrix(&mut rng, 1, 3).view(), 0.9).is_err());
    }

    #[test]
    fn pca_transform_centres_and_rotates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_matrix(&mut rng, 30, 5);
        let m = pca_fit(data.view(), 1.0).unwrap();
        assert_eq!(m.k(), 5);
        let z = pca_transform(&m, &m.mean).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        for row in data.rows() {
            let centred: Vec<f64> = row.iter().zip(&m.mean).map(|(a, b)| a - b).collect();
            let n0 = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
            let p = pca_transform(&m, row.as_slice().unwrap()).unwrap();
            let n1 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(n0, n1, epsilon = 1e-8);
        }
        assert!(pca_transform(&m, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reconstruction_error_decreases_with_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_matrix(&mut rng, 40, 6);
        let full = pca_fit(data.view(), 1.0).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=full.k() {
            let m = full.truncated(k);
            let mut err = 0.0;
            for row in data.rows() {
                let z = m.transform(row).unwrap();
                let back = m.inverse_transform(z.view()).unwrap();
                err += (&back - &row).mapv(|v| v * v).sum();
            }
            assert!(err <= last + 1e-9, "k={k}: {err} > {last}");
            last = err;
        }
        assert!(last < 1e-18 * 40.0 + 1e-12);
    }

    #[test]
    fn zscore_cases() {
        let data = arr2(&[
            [1.0, 5.0, 3.0],
            [2.0, 5.0, -1.0],
            [4.0, 5.0, 0.5],
            [7.0, 5.0, 2.0],
        ]);
        let m = zscore_fit(data.view()).unwrap();
        assert_eq!(m.constant, vec![false, true, false]);
        let rows: Vec<Vec<f64>> = data
            .rows()
            .into_iter()
            .map(|r| m.apply(r.as_slice().unwrap()).unwrap())
            .collect();
        for c in [0, 2] {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(var.sqrt(), 1.0, epsilon = 1e-9);
        }
        assert!(rows.iter().all(|r| r[1] == 0.0));
        assert!(m.apply(&m.mean).unwrap().iter().all(|v| *v == 0.0));
        assert!(zscore_fit(arr2(&[[1.0, 2.0]]).view()).is_err());
    }

    proptest! {
        #[test]
        fn car_rows_sum_to_zero_and_idempotent(seed in any::<u64>(), rows in 1usize..20, cols in 2usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, rows, cols);
            let once = car_filter(m.view()).unwrap();
            for row in once.rows() {
                prop_assert!((row.sum() / cols as f64).abs() < 1e-10);
            }
            let twice = car_filter(once.view()).unwrap();
            prop_assert!(once.iter().zip(twice.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        }

        #[test]
        fn pca_components_orthonormal(seed in any::<u64>(), rows in 3usize..25, cols in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = random_matrix(&mut rng, rows, cols);
            let m = pca_fit(data.view(), 0.9).unwrap();
            let gram = m.components.dot(&m.components.t());
            for i in 0..m.k() {
                for j in 0..m.k() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[[i, j]] - want).abs() < 1e-8);
                }
            }
            prop_assert!(m.explained_variance.iter().sum::<f64>() <= 1.0 + 1e-12);
            prop_assert!(m.explained_variance.windows(2).all(|w| w[0] >= w[1] - 1e-15));
        }

        #[test]
        fn zscore_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = random_matrix(&mut rng, 12, 5);
            let scaled = &data * c;
            let a = zscore_fit(data.view()).unwrap();
            let b = zscore_fit(scaled.view()).unwrap();
            for (r0, r1) in data.rows().into_iter().zip(scaled.rows()) {
                let z0 = a.apply(r0.as_slice().unwrap()).unwrap();
                let z1 = b.apply(r1.as_slice().unwrap()).unwrap();
                for (x, y) in z0.iter().zip(&z1) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn window_bins_inside_interval(centre in 1.0f64..100.0, half in 0.1f64..2.0) {
            let res = 0.2;
            for k in window_bins(res, centre, half) {
                let f = k as f64 * res;
                prop_assert!(f >= centre - half - 1e-6 && f <= centre + half + 1e-6);
            }
            let below = *window_bins(res, centre, half).start();
            if below > 0 {
                prop_assert!(((below - 1) as f64) * res < centre - half + 1e-6);
            }
        }
    }
}
