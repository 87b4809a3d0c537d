//! Deterministic synthetic EEG standing in for recorded subjects.
//!
//! Each channel carries `gain_c * sum_h a_h sin(2 pi h (f + jitter) t + phi_h)`
//! plus pink, white and common-mode noise, and optionally blink and head
//! motion transients. All randomness comes from an explicit ChaCha stream;
//! dataset generation gives every trial its own stream so trials can be
//! produced in parallel without changing the output.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{ProtocolSchedule, SessionPlan};
use crate::types::{
    validate_stimuli, CommandLabel, Provenance, RecordingSpec, StimulusSpec, SubjectDataset,
    TrialRecording,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArtifactSpec {
    pub blink_amplitude: f64,
    pub blink_duration_s: f64,
    /// Band the blink waveform's energy is centred in.
    pub blink_band_hz: (f64, f64),
    pub motion_amplitude: f64,
    pub motion_duration_s: f64,
    /// Expected blinks per trial (Poisson).
    pub blink_rate_per_trial: f64,
    /// Expected head-motion bursts per trial (Poisson).
    pub motion_rate_per_trial: f64,
}

impl Default for ArtifactSpec {
    fn default() -> Self {
        ArtifactSpec {
            blink_amplitude: 60.0,
            blink_duration_s: 0.4,
            blink_band_hz: (1.0, 3.0),
            motion_amplitude: 20.0,
            motion_duration_s: 1.0,
            blink_rate_per_trial: 1.0,
            motion_rate_per_trial: 0.5,
        }
    }
}

impl ArtifactSpec {
    pub fn none() -> Self {
        ArtifactSpec {
            blink_amplitude: 0.0,
            motion_amplitude: 0.0,
            blink_rate_per_trial: 0.0,
            motion_rate_per_trial: 0.0,
            ..ArtifactSpec::default()
        }
    }

    pub fn validate(&self, flicker_seconds: f64) -> Result<()> {
        if self.blink_amplitude < 0.0 || self.motion_amplitude < 0.0 {
            return Err(Error::invalid("artifact amplitudes must be non-negative"));
        }
        if self.blink_rate_per_trial < 0.0 || self.motion_rate_per_trial < 0.0 {
            return Err(Error::invalid("artifact rates must be non-negative"));
        }
        for (what, d) in [
            ("blink", self.blink_duration_s),
            ("motion", self.motion_duration_s),
        ] {
            if !(d > 0.0 && d <= flicker_seconds) {
                return Err(Error::invalid(format!(
                    "{what} duration {d} s must lie in (0, {flicker_seconds}] s"
                )));
            }
        }
        let (lo, hi) = self.blink_band_hz;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::invalid("blink band must satisfy 0 <= low <= high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubjectProfile {
    pub name: String,
    /// SSVEP gain per channel name; channels not listed use `default_gain`.
    pub ssvep_gain: BTreeMap<String, f64>,
    pub default_gain: f64,
    /// Multiplier on the per-channel pink and white noise; unlisted
    /// channels use 1.
    pub channel_noise: BTreeMap<String, f64>,
    /// `a_h` for harmonics `h = 1..=H`.
    pub harmonic_amplitudes: Vec<f64>,
    pub noise_pink_level: f64,
    pub noise_white_level: f64,
    /// Pink noise shared by every electrode (reference drift).
    pub common_noise_level: f64,
    /// Optional 9–11 Hz background rhythm; off by default.
    pub alpha_level: f64,
    /// Half-width of the uniform per-trial frequency offset.
    pub freq_jitter_hz: f64,
    pub artifacts: ArtifactSpec,
    pub seed: u64,
}

impl Default for SubjectProfile {
    fn default() -> Self {
        SubjectProfile::moderate(0)
    }
}

fn occipital_gains() -> BTreeMap<String, f64> {
    [("O1", 1.0), ("O2", 1.0), ("P7", 0.1), ("P8", 0.1)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

impl SubjectProfile {
    /// Noise-free, jitter-free, artifact-free SSVEP.
    pub fn clean(seed: u64) -> Self {
        SubjectProfile {
            name: "clean".into(),
            ssvep_gain: occipital_gains(),
            default_gain: 0.05,
            channel_noise: BTreeMap::new(),
            harmonic_amplitudes: vec![1.0, 0.5],
            noise_pink_level: 0.0,
            noise_white_level: 0.0,
            common_noise_level: 0.0,
            alpha_level: 0.0,
            freq_jitter_hz: 0.0,
            artifacts: ArtifactSpec::none(),
            seed,
        }
    }

    /// Noisy subject with display jitter and common-mode drift; no
    /// artifacts.
    pub fn moderate(seed: u64) -> Self {
        SubjectProfile {
            name: "moderate".into(),
            noise_pink_level: 5.7,
            noise_white_level: 1.9,
            common_noise_level: 2.85,
            freq_jitter_hz: 0.2,
            ..SubjectProfile::clean(seed)
        }
    }

    /// No stimulus response at all.
    pub fn pure_noise(seed: u64) -> Self {
        SubjectProfile {
            name: "pure-noise".into(),
            ssvep_gain: BTreeMap::new(),
            default_gain: 0.0,
            ..SubjectProfile::moderate(seed)
        }
    }

    /// A moderate-noise subject with individual SSVEP strength, harmonic
    /// balance and noise mix drawn from `seed`.
    pub fn sampled(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        let mut p = SubjectProfile::moderate(seed);
        p.name = format!("sampled-{seed}");
        let occ = rng.random_range(0.75..1.25);
        let asym = rng.random_range(0.7..1.0);
        let (left, right) = if rng.random_bool(0.5) {
            (occ, occ * asym)
        } else {
            (occ * asym, occ)
        };
        p.ssvep_gain.insert("O1".into(), left);
        p.ssvep_gain.insert("O2".into(), right);
        p.harmonic_amplitudes = vec![1.0, rng.random_range(0.2..0.8)];
        p.noise_pink_level *= rng.random_range(0.8..1.2);
        p.noise_white_level *= rng.random_range(0.8..1.2);
        p.common_noise_level *= rng.random_range(0.5..1.5);
        p.freq_jitter_hz = rng.random_range(0.1..0.3);
        p
    }

    pub fn with_artifacts(mut self, artifacts: ArtifactSpec) -> Self {
        self.artifacts = artifacts;
        self
    }

    /// Multiplies every noise level by `factor`.
    pub fn scale_noise(mut self, factor: f64) -> Self {
        self.noise_pink_level *= factor;
        self.noise_white_level *= factor;
        self.common_noise_level *= factor;
        self
    }

    pub fn gain(&self, channel: &str) -> f64 {
        self.ssvep_gain
            .get(channel)
            .copied()
            .unwrap_or(self.default_gain)
    }

    pub fn noise_scale(&self, channel: &str) -> f64 {
        self.channel_noise.get(channel).copied().unwrap_or(1.0)
    }

    pub fn validate(&self, spec: &RecordingSpec) -> Result<()> {
        if !self.harmonic_amplitudes.iter().any(|&a| a > 0.0) {
            return Err(Error::invalid(
                "at least one harmonic amplitude must be positive",
            ));
        }
        if !(0.0..0.5).contains(&self.freq_jitter_hz) {
            return Err(Error::invalid(format!(
                "frequency jitter {} Hz must lie in [0, 0.5)",
                self.freq_jitter_hz
            )));
        }
        let levels = [
            self.noise_pink_level,
            self.noise_white_level,
            self.common_noise_level,
            self.alpha_level,
            self.default_gain,
        ];
        if levels
            .iter()
            .chain(self.ssvep_gain.values())
            .chain(self.channel_noise.values())
            .any(|v| *v < 0.0 || !v.is_finite())
        {
            return Err(Error::invalid(
                "gains and noise levels must be finite and non-negative",
            ));
        }
        self.artifacts.validate(spec.flicker_seconds)
    }
}

/// Pink (1/f) noise by filtering white noise through Paul Kellet's
/// refined seven-pole approximation, normalised to unit RMS.
pub fn pink_noise(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    const WARMUP: usize = 2048;
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(len);
    for i in 0..len + WARMUP {
        let white: f64 = rng.sample(StandardNormal);
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let v = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        if i >= WARMUP {
            out.push(v);
        }
    }
    let mean = out.iter().sum::<f64>() / len.max(1) as f64;
    let rms = (out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v = (*v - mean) / rms);
    }
    out
}

/// Background activity with no stimulus response.
fn background(
    profile: &SubjectProfile,
    spec: &RecordingSpec,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let n_ch = spec.n_channels();
    let mut out = Array2::zeros((len, n_ch));
    if profile.common_noise_level > 0.0 {
        let common = pink_noise(len, rng);
        for mut col in out.columns_mut() {
            col.iter_mut()
                .zip(&common)
                .for_each(|(v, c)| *v += profile.common_noise_level * c);
        }
    }
    for (c, mut col) in out.columns_mut().into_iter().enumerate() {
        let scale = profile.noise_scale(&spec.channels[c]);
        if profile.noise_pink_level > 0.0 {
            let level = scale * profile.noise_pink_level;
            let pink = pink_noise(len, rng);
            col.iter_mut().zip(&pink).for_each(|(v, p)| *v += level * p);
        }
        if profile.noise_white_level > 0.0 {
            let white =
                Normal::new(0.0, scale * profile.noise_white_level).expect("non-negative sd");
            col.iter_mut().for_each(|v| *v += white.sample(rng));
        }
    }
    if profile.alpha_level > 0.0 {
        let f = rng.random_range(9.0..11.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let t = i as f64 / spec.sampling_rate_hz;
            let a = profile.alpha_level * (2.0 * PI * f * t + phase).sin();
            row.iter_mut().for_each(|v| *v += a);
        }
    }
    out
}

/// Generates one flicker window for `target`. Indices and subject id are
/// left at defaults for the caller to fill in.
pub fn synth_trial(
    profile: &SubjectProfile,
    target: CommandLabel,
    stimuli: &[StimulusSpec],
    spec: &RecordingSpec,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecording> {
    profile.validate(spec)?;
    let stim = stimuli
        .get(target.0)
        .ok_or_else(|| Error::invalid(format!("target {target} has no stimulus")))?;
    let nyquist = spec.nyquist_hz();
    for (h, &a) in profile.harmonic_amplitudes.iter().enumerate() {
        let f = (h + 1) as f64 * (stim.frequency_hz + profile.freq_jitter_hz);
        if a != 0.0 && f >= nyquist {
            return Err(Error::AboveNyquist {
                what: format!("harmonic {} of `{}`", h + 1, stim.name),
                freq_hz: f,
                nyquist_hz: nyquist,
            });
        }
    }

    let len = spec.samples_per_trial;
    let jitter = if profile.freq_jitter_hz > 0.0 {
        rng.random_range(-profile.freq_jitter_hz..=profile.freq_jitter_hz)
    } else {
        0.0
    };
    let f = stim.frequency_hz + jitter;
    let phases: Vec<f64> = profile
        .harmonic_amplitudes
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let response: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 / spec.sampling_rate_hz;
            profile
                .harmonic_amplitudes
                .iter()
                .zip(&phases)
                .enumerate()
                .map(|(h, (a, phi))| a * (2.0 * PI * (h + 1) as f64 * f * t + phi).sin())
                .sum()
        })
        .collect();

    let mut samples = background(profile, spec, len, rng);
    for (c, mut col) in samples.columns_mut().into_iter().enumerate() {
        let g = profile.gain(&spec.channels[c]);
        if g != 0.0 {
            col.iter_mut().zip(&response).for_each(|(v, r)| *v += g * r);
        }
    }
    let trial = TrialRecording {
        samples,
        true_label: target,
        trial_index: 0,
        session_index: 0,
        subject_id: profile.name.clone(),
    };
    Ok(inject_artifacts(&trial, &profile.artifacts, spec, rng))
}

/// Stream for trial `global_index` of a subject with base seed `seed`.
pub fn trial_rng(seed: u64, global_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(global_index);
    rng
}

/// One trial per scheduled slot, in schedule order.
pub fn synth_dataset(
    profile: &SubjectProfile,
    schedule: &ProtocolSchedule,
    stimuli: &[StimulusSpec],
    spec: &RecordingSpec,
) -> Result<SubjectDataset> {
    spec.validate()?;
    validate_stimuli(stimuli, spec.sampling_rate_hz)?;
    let slots: Vec<(usize, usize, CommandLabel)> = schedule
        .sessions
        .iter()
        .enumerate()
        .flat_map(|(s, plan)| {
            plan.labels()
                .into_iter()
                .enumerate()
                .map(move |(t, l)| (s, t, l))
        })
        .collect();
    let trials = slots
        .par_iter()
        .enumerate()
        .map(|(g, &(session, trial, label))| {
            let mut rng = trial_rng(profile.seed, g as u64);
            let mut rec = synth_trial(profile, label, stimuli, spec, &mut rng)?;
            rec.session_index = session;
            rec.trial_index = trial;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SubjectDataset {
        spec: spec.clone(),
        stimuli: stimuli.to_vec(),
        trials,
        provenance: Provenance::Synthetic {
            seed: profile.seed,
            profile: profile.name.clone(),
        },
        schedule: Some(schedule.clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Blink,
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEvent {
    pub kind: ArtifactKind,
    pub onset_s: f64,
}

/// Relative blink amplitude per electrode: strongest frontally.
fn blink_weight(channel: &str) -> f64 {
    match channel {
        "AF3" | "AF4" => 1.0,
        "F7" | "F8" => 0.7,
        "F3" | "F4" => 0.6,
        "FC5" | "FC6" => 0.35,
        "T7" | "T8" => 0.2,
        "P7" | "P8" => 0.1,
        "O1" | "O2" => 0.05,
        _ => 0.3,
    }
}

/// Relative muscle/motion amplitude per electrode for head rotation.
fn motion_weight(channel: &str) -> f64 {
    match channel {
        "T7" | "T8" => 1.0,
        "F7" | "F8" | "FC5" | "FC6" => 0.8,
        "P7" | "P8" => 0.6,
        "O1" | "O2" => 0.5,
        _ => 0.4,
    }
}

/// Draws Poisson-many blink and motion events and adds them to a copy of
/// `trial`. Shape and label are never changed.
pub fn inject_artifacts(
    trial: &TrialRecording,
    artifacts: &ArtifactSpec,
    spec: &RecordingSpec,
    rng: &mut ChaCha8Rng,
) -> TrialRecording {
    let duration = trial.n_samples() as f64 / spec.sampling_rate_hz;
    let mut events = Vec::new();
    for (kind, rate, len_s) in [
        (
            ArtifactKind::Blink,
            artifacts.blink_rate_per_trial,
            artifacts.blink_duration_s,
        ),
        (
            ArtifactKind::Motion,
            artifacts.motion_rate_per_trial,
            artifacts.motion_duration_s,
        ),
    ] {
        if rate <= 0.0 {
            continue;
        }
        let count = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
        let latest = (duration - len_s).max(0.0);
        for _ in 0..count {
            events.push(ArtifactEvent {
                kind,
                onset_s: rng.random_range(0.0..=latest),
            });
        }
    }
    apply_artifact_events(trial, artifacts, spec, &events, rng)
}

/// Adds the given events to a copy of `trial`. Each event only touches
/// samples inside `[onset, onset + duration)`.
pub fn apply_artifact_events(
    trial: &TrialRecording,
    artifacts: &ArtifactSpec,
    spec: &RecordingSpec,
    events: &[ArtifactEvent],
    rng: &mut ChaCha8Rng,
) -> TrialRecording {
    let mut out = trial.clone();
    let fs = spec.sampling_rate_hz;
    let n = out.n_samples();
    let channels: Vec<&str> = (0..out.n_channels())
        .map(|c| spec.channels.get(c).map(String::as_str).unwrap_or(""))
        .collect();
    for ev in events {
        let (amp, dur) = match ev.kind {
            ArtifactKind::Blink => (artifacts.blink_amplitude, artifacts.blink_duration_s),
            ArtifactKind::Motion => (artifacts.motion_amplitude, artifacts.motion_duration_s),
        };
        if amp == 0.0 {
            continue;
        }
        let start = (ev.onset_s * fs).round() as usize;
        let width = (dur * fs).round() as usize;
        let end = (start + width).min(n);
        if start >= end {
            continue;
        }
        let hann = |i: usize| 0.5 - 0.5 * (2.0 * PI * i as f64 / width as f64).cos();
        match ev.kind {
            ArtifactKind::Blink => {
                let fc = 0.5 * (artifacts.blink_band_hz.0 + artifacts.blink_band_hz.1);
                for i in 0..end - start {
                    let tau = i as f64 / fs - dur / 2.0;
                    let w = amp * hann(i) * (2.0 * PI * fc * tau).cos();
                    for (c, name) in channels.iter().enumerate() {
                        out.samples[[start + i, c]] += w * blink_weight(name);
                    }
                }
            }
            ArtifactKind::Motion => {
                // slow electrode shift plus broadband muscle activity
                for (c, name) in channels.iter().enumerate() {
                    let weight = amp * motion_weight(name);
                    for i in 0..end - start {
                        let drift = (PI * i as f64 / width as f64).sin();
                        let emg: f64 = rng.sample(StandardNormal);
                        out.samples[[start + i, c]] += weight * hann(i) * (emg + 2.0 * drift);
                    }
                }
            }
        }
    }
    out
}

/// A continuous recording of one session including the rest periods, for
/// exercising the synchronisation-clock slicer. Returns the stream and
/// the flicker-window trials embedded in it.
pub fn synth_session_stream(
    profile: &SubjectProfile,
    plan: &SessionPlan,
    stimuli: &[StimulusSpec],
    spec: &RecordingSpec,
    inter_part_rest_seconds: f64,
) -> Result<(Array2<f64>, Vec<TrialRecording>)> {
    let fs = spec.sampling_rate_hz;
    let rest = (spec.rest_seconds * fs).round() as usize;
    let gap = (inter_part_rest_seconds * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut blocks: Vec<Array2<f64>> = Vec::new();
    let mut trials = Vec::new();
    let quiet = SubjectProfile {
        artifacts: ArtifactSpec::none(),
        ..profile.clone()
    };
    for (part, labels) in [&plan.part_a, &plan.part_b].into_iter().enumerate() {
        if part == 1 && !labels.is_empty() && !plan.part_a.is_empty() {
            blocks.push(background(&quiet, spec, gap, &mut rng));
        }
        for &label in labels.iter() {
            let mut trial = synth_trial(profile, label, stimuli, spec, &mut rng)?;
            trial.trial_index = trials.len();
            blocks.push(trial.samples.clone());
            trials.push(trial);
            blocks.push(background(&quiet, spec, rest, &mut rng));
        }
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let stream = ndarray::concatenate(Axis(0), &views)
        .unwrap_or_else(|_| Array2::zeros((0, spec.n_channels())));
    Ok((stream, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::power_spectrum;
    use crate::types::default_stimuli;

    fn channel(trial: &TrialRecording, spec: &RecordingSpec, name: &str) -> Vec<f64> {
        trial
            .samples
            .column(spec.channel_index(name).unwrap())
            .to_vec()
    }

    #[test]
    fn clean_trial_peaks_at_stimulus() {
        let spec = RecordingSpec::default();
        let mut p = SubjectProfile::clean(1);
        p.harmonic_amplitudes = vec![1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = synth_trial(&p, CommandLabel(0), &default_stimuli(), &spec, &mut rng).unwrap();
        let s = power_spectrum(&channel(&t, &spec, "O1"), spec.sampling_rate_hz).unwrap();
        assert_eq!(s.peak_bin(), 60);
        assert_eq!(s.frequency(s.peak_bin()), 12.0);
    }

    #[test]
    fn second_harmonic_appears() {
        let spec = RecordingSpec::default();
        let mut p = SubjectProfile::clean(1);
        p.harmonic_amplitudes = vec![1.0, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = synth_trial(&p, CommandLabel(0), &default_stimuli(), &spec, &mut rng).unwrap();
        let s = power_spectrum(&channel(&t, &spec, "O1"), spec.sampling_rate_hz).unwrap();
        let p24 = s.power[120];
        let rest_max = s
            .power
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != 60 && *k != 120)
            .fold(0.0f64, |m, (_, &v)| m.max(v));
        assert!(p24 > rest_max, "{p24} vs {rest_max}");
        assert!(p24 < s.power[60]);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = RecordingSpec::default();
        let p = SubjectProfile::moderate(5).with_artifacts(ArtifactSpec::default());
        let a = synth_trial(
            &p,
            CommandLabel(1),
            &default_stimuli(),
            &spec,
            &mut trial_rng(5, 3),
        )
        .unwrap();
        let b = synth_trial(
            &p,
            CommandLabel(1),
            &default_stimuli(),
            &spec,
            &mut trial_rng(5, 3),
        )
        .unwrap();
        assert_eq!(a.samples, b.samples);
        let c = synth_trial(
            &p,
            CommandLabel(1),
            &default_stimuli(),
            &spec,
            &mut trial_rng(5, 4),
        )
        .unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn rejects_harmonic_above_nyquist() {
        let spec = RecordingSpec::default();
        let mut p = SubjectProfile::clean(0);
        p.harmonic_amplitudes = vec![1.0; 11];
        let err = synth_trial(
            &p,
            CommandLabel(0),
            &default_stimuli(),
            &spec,
            &mut trial_rng(0, 0),
        );
        assert!(matches!(err, Err(Error::AboveNyquist { .. })));
        // a zero amplitude above Nyquist is allowed
        p.harmonic_amplitudes = vec![1.0; 10];
        p.harmonic_amplitudes.push(0.0);
        assert!(synth_trial(
            &p,
            CommandLabel(0),
            &default_stimuli(),
            &spec,
            &mut trial_rng(0, 0)
        )
        .is_ok());
    }

    #[test]
    fn profile_validation() {
        let spec = RecordingSpec::default();
        let mut p = SubjectProfile::clean(0);
        p.freq_jitter_hz = 0.5;
        assert!(p.validate(&spec).is_err());
        let mut p = SubjectProfile::clean(0);
        p.harmonic_amplitudes = vec![0.0, 0.0];
        assert!(p.validate(&spec).is_err());
        let mut p = SubjectProfile::clean(0);
        p.artifacts.blink_duration_s = 6.0;
        assert!(p.validate(&spec).is_err());
    }

    #[test]
    fn zero_amplitude_artifacts_are_identity() {
        let spec = RecordingSpec::default();
        let p = SubjectProfile::moderate(2);
        let t = synth_trial(
            &p,
            CommandLabel(2),
            &default_stimuli(),
            &spec,
            &mut trial_rng(2, 0),
        )
        .unwrap();
        let none = ArtifactSpec {
            blink_amplitude: 0.0,
            motion_amplitude: 0.0,
            blink_rate_per_trial: 3.0,
            motion_rate_per_trial: 3.0,
            ..ArtifactSpec::default()
        };
        let out = inject_artifacts(&t, &none, &spec, &mut trial_rng(9, 9));
        assert_eq!(out, t);
    }

    #[test]
    fn blink_is_confined_to_its_window() {
        let spec = RecordingSpec::default();
        let p = SubjectProfile::moderate(3);
        let t = synth_trial(
            &p,
            CommandLabel(0),
            &default_stimuli(),
            &spec,
            &mut trial_rng(3, 0),
        )
        .unwrap();
        let art = ArtifactSpec::default();
        let ev = [ArtifactEvent {
            kind: ArtifactKind::Blink,
            onset_s: 2.0,
        }];
        let out = apply_artifact_events(&t, &art, &spec, &ev, &mut trial_rng(0, 0));
        let start = (2.0 * 257.0f64).round() as usize;
        let end = start + (art.blink_duration_s * 257.0).round() as usize;
        let diff = &out.samples - &t.samples;
        for (r, row) in diff.rows().into_iter().enumerate() {
            let touched = row.iter().any(|v| *v != 0.0);
            if touched {
                assert!((start..end).contains(&r), "row {r} changed outside window");
            }
        }
        assert!(diff.iter().any(|v| *v != 0.0));
        assert_eq!(out.true_label, t.true_label);
        assert_eq!(out.samples.dim(), t.samples.dim());
    }

    #[test]
    fn pink_noise_is_unit_rms() {
        let x = pink_noise(4096, &mut ChaCha8Rng::seed_from_u64(1));
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-9);
    }
}
