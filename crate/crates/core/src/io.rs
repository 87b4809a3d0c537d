//! Trial CSV files, dataset directories, run configuration, model files and
//! the line-oriented command bridge.
//!
//! A trial file is a `# key: value` header, a row of channel names, then
//! one row per sample:
//!
//! ```text
//! # subject: sampled-3
//! # session: 0
//! # trial: 4
//! # label: 2
//! # sampling_rate_hz: 257
//! AF3,F7,F3,FC5,T7,P7,O1,O2,P8,T8,FC6,F4,F8,AF4
//! 0.25,-1.5,...
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classifiers::TrainableSpec;
use crate::ensemble::{default_classifiers, EnsembleModel};
use crate::error::{Error, Result};
use crate::metrics::TimeBase;
use crate::preprocess::PreprocessConfig;
use crate::protocol::{
    run_online_session, CommandSink, ExperimentConfig, OnlineEvent, OnlineReport, OnlineTrial,
};
use crate::synth::SubjectProfile;
use crate::types::{
    default_stimuli, validate_dataset, validate_stimuli, CommandLabel, Provenance, RecordingSpec,
    StimulusSpec, SubjectDataset, TrialRecording,
};

/// Shortest text that parses back to the identical value.
fn fmt_sample(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_trial<W: Write>(
    mut out: W,
    trial: &TrialRecording,
    spec: &RecordingSpec,
) -> Result<()> {
    writeln!(out, "# subject: {}", trial.subject_id)?;
    writeln!(out, "# session: {}", trial.session_index)?;
    writeln!(out, "# trial: {}", trial.trial_index)?;
    writeln!(out, "# label: {}", trial.true_label.0)?;
    writeln!(out, "# sampling_rate_hz: {}", spec.sampling_rate_hz)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&spec.channels).map_err(csv_io)?;
    for row in trial.samples.rows() {
        w.write_record(row.iter().map(|v| fmt_sample(*v)))
            .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn format_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::TrialFormat {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses a trial and checks it against `spec`. Data rows and columns in
/// error messages are 1-based and exclude the header lines.
pub fn read_trial<R: Read>(input: R, spec: &RecordingSpec) -> Result<TrialRecording> {
    let mut reader = BufReader::new(input);
    let mut meta = BTreeMap::new();
    let mut line = String::new();
    let header_line = loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(format_err("end of file", "missing channel header row"));
        }
        match line.trim().strip_prefix('#') {
            Some(kv) => {
                let (k, v) = kv.split_once(':').ok_or_else(|| {
                    format_err(
                        "header",
                        format!("expected `# key: value`, got `{}`", line.trim()),
                    )
                })?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            None if line.trim().is_empty() => continue,
            None => break line.clone(),
        }
    };
    let get = |key: &str| -> Result<&String> {
        meta.get(key)
            .ok_or_else(|| format_err("header", format!("missing `{key}`")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| format_err("header", format!("`{key}` is not a non-negative integer")))
    };
    let label = CommandLabel(parse_usize("label")?);
    let session_index = parse_usize("session")?;
    let trial_index = parse_usize("trial")?;
    let subject_id = get("subject")?.clone();
    if let Some(fs) = meta.get("sampling_rate_hz") {
        let fs: f64 = fs
            .parse()
            .map_err(|_| format_err("header", "`sampling_rate_hz` is not a number"))?;
        if fs != spec.sampling_rate_hz {
            return Err(format_err(
                "header",
                format!(
                    "sampling rate {fs} Hz differs from configured {} Hz",
                    spec.sampling_rate_hz
                ),
            ));
        }
    }

    let names: Vec<String> = header_line
        .trim_end_matches(['\r', '\n'])
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let n_ch = spec.n_channels();
    let mut values = Vec::with_capacity(spec.samples_per_trial * n_ch);
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| format_err(format!("row {row}"), e.to_string()))?;
        if rec.len() != n_ch {
            return Err(format_err(
                format!("row {row}"),
                format!("expected {n_ch} columns, found {}", rec.len()),
            ));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                format_err(
                    format!("row {row}, column {}", c + 1),
                    format!("cannot parse `{field}` as a number"),
                )
            })?;
            if !v.is_finite() {
                return Err(format_err(
                    format!("row {row}, column {}", c + 1),
                    "non-finite value",
                ));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows != spec.samples_per_trial {
        return Err(format_err(
            format!("row {}", rows + 1),
            format!("expected {} rows, found {rows}", spec.samples_per_trial),
        ));
    }
    if names != spec.channels {
        return Err(format_err(
            "channel header",
            format!(
                "expected {}, found {}",
                spec.channels.join(","),
                names.join(",")
            ),
        ));
    }
    let samples = Array2::from_shape_vec((rows, n_ch), values).expect("row-major fill");
    Ok(TrialRecording {
        samples,
        true_label: label,
        trial_index,
        session_index,
        subject_id,
    })
}

pub fn write_trial_file(path: &Path, trial: &TrialRecording, spec: &RecordingSpec) -> Result<()> {
    let f = std::io::BufWriter::new(fs::File::create(path)?);
    write_trial(f, trial, spec)
}

pub fn read_trial_file(path: &Path, spec: &RecordingSpec) -> Result<TrialRecording> {
    read_trial(fs::File::open(path)?, spec).map_err(|e| match e {
        Error::TrialFormat { location, message } => Error::TrialFormat {
            location: format!("{}: {location}", path.display()),
            message,
        },
        other => other,
    })
}

const MANIFEST: &str = "dataset.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetManifest {
    spec: RecordingSpec,
    stimuli: Vec<StimulusSpec>,
    provenance: Provenance,
    schedule: Option<crate::protocol::ProtocolSchedule>,
    trials: Vec<String>,
}

fn trial_file_name(t: &TrialRecording) -> String {
    format!("s{:02}_t{:03}.csv", t.session_index, t.trial_index)
}

/// Writes `dataset.json` plus one CSV per trial into `dir`.
pub fn write_dataset(dir: &Path, dataset: &SubjectDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(dataset.trials.len());
    for t in &dataset.trials {
        let name = trial_file_name(t);
        write_trial_file(&dir.join(&name), t, &dataset.spec)?;
        names.push(name);
    }
    let manifest = DatasetManifest {
        spec: dataset.spec.clone(),
        stimuli: dataset.stimuli.clone(),
        provenance: dataset.provenance.clone(),
        schedule: dataset.schedule.clone(),
        trials: names,
    };
    fs::write(
        dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest).map_err(json_err)?,
    )?;
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a dataset directory and rejects it if any invariant fails.
pub fn read_dataset(dir: &Path) -> Result<SubjectDataset> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| format_err(dir.join(MANIFEST).display().to_string(), e.to_string()))?;
    let trials = manifest
        .trials
        .iter()
        .map(|name| read_trial_file(&dir.join(name), &manifest.spec))
        .collect::<Result<Vec<_>>>()?;
    let dataset = SubjectDataset {
        spec: manifest.spec,
        stimuli: manifest.stimuli,
        trials,
        provenance: manifest.provenance,
        schedule: manifest.schedule,
    };
    if let Some(v) = validate_dataset(&dataset).into_iter().next() {
        return Err(Error::invalid(format!("dataset {}: {v}", dir.display())));
    }
    Ok(dataset)
}

/// One preprocessing configuration of the bank, by its two switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSwitches {
    pub car: bool,
    pub pca: bool,
}

fn default_switches() -> Vec<VariantSwitches> {
    [(true, true), (true, false), (false, true), (false, false)]
        .into_iter()
        .map(|(car, pca)| VariantSwitches { car, pca })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub schedule_seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            schedule_seed: 0,
            split_seed: 0,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineConfig {
    /// Address the command bridge listens on.
    pub listen: String,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            listen: "127.0.0.1:5005".into(),
        }
    }
}

/// Everything a run needs. An empty file yields the defaults: three
/// stimuli at 12, 10 and 8.57 Hz, 257 Hz recording of 5 s trials, eight
/// variants on O1/O2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stimuli: Vec<StimulusSpec>,
    pub recording: RecordingSpec,
    /// Shared settings for every variant; `use_car`/`use_pca` come from
    /// `variants`.
    pub preprocess: PreprocessConfig,
    pub variants: Vec<VariantSwitches>,
    pub classifiers: Vec<TrainableSpec>,
    pub protocol: ProtocolConfig,
    pub time_base: TimeBase,
    pub subject: SubjectProfile,
    pub online: OnlineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stimuli: default_stimuli(),
            recording: RecordingSpec::default(),
            preprocess: PreprocessConfig::default(),
            variants: default_switches(),
            classifiers: default_classifiers(0),
            protocol: ProtocolConfig::default(),
            time_base: TimeBase::default(),
            subject: SubjectProfile::moderate(0),
            online: OnlineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn preprocess_configs(&self) -> Vec<PreprocessConfig> {
        self.variants
            .iter()
            .map(|v| self.preprocess.clone().with_flags(v.car, v.pca))
            .collect()
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            train_fraction: self.protocol.train_fraction,
            split_seed: self.protocol.split_seed,
            classifiers: self.classifiers.clone(),
            preprocess: self.preprocess_configs(),
            time_base: self.time_base,
        }
    }

    /// Checks every value, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        fn at(path: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::config(path, strip_prefix(e))
        }
        self.recording.validate().map_err(at("recording"))?;
        validate_stimuli(&self.stimuli, self.recording.sampling_rate_hz).map_err(at("stimuli"))?;
        for c in &self.preprocess.channels {
            if self.recording.channel_index(c).is_none() {
                return Err(Error::config(
                    "preprocess.channels",
                    format!("unknown channel `{c}`"),
                ));
            }
        }
        if self.preprocess.harmonics.is_empty() || self.preprocess.harmonics.contains(&0) {
            return Err(Error::config(
                "preprocess.harmonics",
                "harmonics must be positive multipliers",
            ));
        }
        let nyquist = self.recording.nyquist_hz();
        for s in &self.stimuli {
            for &h in &self.preprocess.harmonics {
                let top = h as f64 * s.frequency_hz + self.preprocess.half_width_hz;
                if top >= nyquist {
                    return Err(Error::config(
                        "preprocess.harmonics",
                        format!(
                            "harmonic {h} of `{}` ({:.2} Hz) plus the window half-width reaches the Nyquist limit {nyquist} Hz",
                            s.name,
                            h as f64 * s.frequency_hz
                        ),
                    ));
                }
            }
        }
        self.preprocess.validate().map_err(at("preprocess"))?;
        if self.variants.is_empty() {
            return Err(Error::config(
                "variants",
                "at least one variant is required",
            ));
        }
        if self.classifiers.is_empty() {
            return Err(Error::config(
                "classifiers",
                "at least one classifier is required",
            ));
        }
        for (i, c) in self.classifiers.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::config(format!("classifiers[{i}]"), strip_prefix(e)))?;
        }
        let f = self.protocol.train_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::config(
                "protocol.train_fraction",
                format!("must lie in (0, 1], got {f}"),
            ));
        }
        self.time_base
            .classifications_per_minute()
            .map_err(at("time_base"))?;
        self.subject
            .validate(&self.recording)
            .map_err(at("subject"))?;
        Ok(())
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::InvalidInput(m) => m,
        other => other.to_string(),
    }
}

/// Parses TOML text into a validated configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let path = e
            .span()
            .map(|s| key_path_at(text, s.start))
            .unwrap_or_default();
        Error::config(path, e.message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Dotted path of the table enclosing byte offset `pos`, plus the key on
/// that line.
fn key_path_at(text: &str, pos: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if pos < offset + line.len() {
            if let Some((k, _)) = t.split_once('=') {
                key = k.trim().to_string();
            }
            break;
        }
        offset += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn config_to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config("", e.to_string()))
}

pub fn save_config(path: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(path, config_to_toml(cfg)?)?;
    Ok(())
}

pub const MODEL_FORMAT: &str = "ssvep-ensemble";
pub const MODEL_VERSION: u32 = 1;

/// How the training trials were chosen, so the held-out trials can be
/// recovered later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train_fraction: f64,
    pub seed: u64,
    pub subject_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub split: Option<SplitRecord>,
    pub model: EnsembleModel,
}

impl ModelFile {
    pub fn new(model: EnsembleModel, split: Option<SplitRecord>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            split,
            model,
        }
    }
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let out = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(out, file).map_err(json_err)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path)?;
    let head: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    match (
        head.get("format").and_then(|v| v.as_str()),
        head.get("version").and_then(|v| v.as_u64()),
    ) {
        (Some(MODEL_FORMAT), Some(v)) if v == MODEL_VERSION as u64 => {}
        (Some(MODEL_FORMAT), v) => {
            return Err(Error::ModelFormat(format!(
                "unsupported version {v:?}, expected {MODEL_VERSION}"
            )))
        }
        _ => {
            return Err(Error::ModelFormat(format!(
                "{} is not an {MODEL_FORMAT} model",
                path.display()
            )))
        }
    }
    serde_json::from_value(head).map_err(|e| Error::ModelFormat(e.to_string()))
}

/// One frame of the command bridge.
#[derive(Debug, Clone, PartialEq)]
pub enum BridgeMessage {
    Cmd {
        label: CommandLabel,
        name: String,
        tally: f64,
    },
    Err {
        code: String,
        detail: String,
    },
    End,
}

fn one_token(s: &str) -> String {
    let t: String = s.split_whitespace().collect::<Vec<_>>().join("_");
    if t.is_empty() {
        "-".into()
    } else {
        t
    }
}

impl fmt::Display for BridgeMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BridgeMessage::Cmd { label, name, tally } => {
                write!(f, "CMD {} {} {}", label.0, one_token(name), tally)
            }
            BridgeMessage::Err { code, detail } => {
                let detail = detail.replace(['\r', '\n'], " ");
                write!(f, "ERR {} {}", one_token(code), detail.trim())
            }
            BridgeMessage::End => f.write_str("END"),
        }
    }
}

impl FromStr for BridgeMessage {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let line = line.trim_end_matches(['\r', '\n']);
        let bad = || Error::invalid(format!("malformed bridge frame `{line}`"));
        let mut parts = line.splitn(2, ' ');
        match parts.next() {
            Some("END") if parts.next().is_none() => Ok(BridgeMessage::End),
            Some("CMD") => {
                let rest: Vec<&str> = parts.next().ok_or_else(bad)?.split(' ').collect();
                let [label, name, tally] = rest[..] else {
                    return Err(bad());
                };
                Ok(BridgeMessage::Cmd {
                    label: CommandLabel(label.parse().map_err(|_| bad())?),
                    name: name.to_string(),
                    tally: tally.parse().map_err(|_| bad())?,
                })
            }
            Some("ERR") => {
                let rest = parts.next().ok_or_else(bad)?;
                let (code, detail) = rest.split_once(' ').unwrap_or((rest, ""));
                Ok(BridgeMessage::Err {
                    code: code.to_string(),
                    detail: detail.to_string(),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl From<&OnlineEvent> for BridgeMessage {
    fn from(e: &OnlineEvent) -> Self {
        match e {
            OnlineEvent::Command {
                label,
                name,
                winning_tally,
                ..
            } => BridgeMessage::Cmd {
                label: *label,
                name: name.clone(),
                tally: *winning_tally,
            },
            OnlineEvent::Error {
                trial_id,
                code,
                detail,
            } => BridgeMessage::Err {
                code: code.clone(),
                detail: match trial_id {
                    Some(id) => format!("{id}: {detail}"),
                    None => detail.clone(),
                },
            },
        }
    }
}

/// Writes one frame per event to any byte sink.
pub struct LineSink<W: Write> {
    out: W,
}

impl<W: Write> LineSink<W> {
    pub fn new(out: W) -> Self {
        LineSink { out }
    }

    pub fn finish(mut self) -> Result<W> {
        writeln!(self.out, "{}", BridgeMessage::End)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> CommandSink for LineSink<W> {
    fn emit(&mut self, event: &OnlineEvent) -> Result<()> {
        writeln!(self.out, "{}", BridgeMessage::from(event))?;
        self.out.flush()?;
        Ok(())
    }
}

/// Serves frames to one TCP client at a time. A frame that cannot be
/// delivered is kept and sent to the next client that connects.
struct TcpSink<'a> {
    listener: &'a TcpListener,
    client: Option<TcpStream>,
}

/// False once the peer has closed its end.
fn peer_open(stream: &TcpStream) -> bool {
    let mut buf = [0u8; 64];
    if stream.set_nonblocking(true).is_err() {
        return false;
    }
    let open = loop {
        match stream.peek(&mut buf) {
            Ok(0) => break false,
            Ok(n) => {
                // clients are not expected to talk; drain and ignore
                let mut sink = vec![0u8; n];
                if (&*stream).read(&mut sink).is_err() {
                    break false;
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => break true,
            Err(_) => break false,
        }
    };
    stream.set_nonblocking(false).is_ok() && open
}

impl TcpSink<'_> {
    fn connected(&mut self) -> Result<&mut TcpStream> {
        if let Some(c) = &self.client {
            if !peer_open(c) {
                log::warn!("bridge client disconnected; waiting for a new client");
                self.client = None;
            }
        }
        if self.client.is_none() {
            let (stream, addr) = self.listener.accept()?;
            log::info!("bridge client connected from {addr}");
            stream.set_nodelay(true)?;
            self.client = Some(stream);
        }
        Ok(self.client.as_mut().expect("just connected"))
    }

    fn send(&mut self, msg: &BridgeMessage) -> Result<()> {
        let line = format!("{msg}\n");
        loop {
            let stream = self.connected()?;
            match stream
                .write_all(line.as_bytes())
                .and_then(|_| stream.flush())
            {
                Ok(()) => return Ok(()),
                Err(e) => {
                    log::warn!("bridge write failed ({e}); waiting for a new client");
                    self.client = None;
                }
            }
        }
    }
}

impl CommandSink for TcpSink<'_> {
    fn emit(&mut self, event: &OnlineEvent) -> Result<()> {
        self.send(&BridgeMessage::from(event))
    }
}

/// Classifies `source` and streams `CMD`/`ERR` frames to a TCP client,
/// finishing with `END`. Blocks until a client is connected whenever a
/// frame is ready.
pub fn serve_commands<I>(
    listener: &TcpListener,
    model: &EnsembleModel,
    source: I,
) -> Result<OnlineReport>
where
    I: IntoIterator<Item = Result<OnlineTrial>>,
{
    let mut sink = TcpSink {
        listener,
        client: None,
    };
    let report = run_online_session(model, source, &mut sink)?;
    sink.send(&BridgeMessage::End)?;
    if let Some(c) = sink.client.take() {
        let _ = c.shutdown(std::net::Shutdown::Write);
    }
    Ok(report)
}

/// Reads frames until `END` or end of stream.
pub fn read_frames<R: Read>(input: R) -> Result<Vec<BridgeMessage>> {
    let mut frames = Vec::new();
    for line in BufReader::new(input).lines() {
        let msg: BridgeMessage = line?.parse()?;
        let end = msg == BridgeMessage::End;
        frames.push(msg);
        if end {
            break;
        }
    }
    Ok(frames)
}

/// Trial CSVs in a directory, sorted by name, as an online source.
pub fn trial_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> RecordingSpec {
        RecordingSpec {
            samples_per_trial: 8,
            flicker_seconds: 8.0 / 257.0,
            ..RecordingSpec::default()
        }
    }

    fn trial(spec: &RecordingSpec) -> TrialRecording {
        let samples =
            Array2::from_shape_fn((spec.samples_per_trial, spec.n_channels()), |(r, c)| {
                ((r * 31 + c * 7) as f64).sin() * 10f64.powi((c % 5) as i32 - 2) + 1e-7 * r as f64
            });
        TrialRecording {
            samples,
            true_label: CommandLabel(2),
            trial_index: 4,
            session_index: 1,
            subject_id: "s9".into(),
        }
    }

    #[test]
    fn trial_round_trip_is_exact() {
        let spec = small_spec();
        let t = trial(&spec);
        let mut buf = Vec::new();
        write_trial(&mut buf, &t, &spec).unwrap();
        let back = read_trial(&buf[..], &spec).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sample_formatting_round_trips() {
        for v in [
            0.0,
            -0.0,
            1e-300,
            5e-5,
            123.456,
            -9.87654321e20,
            f64::MIN_POSITIVE,
            1.0 / 3.0,
        ] {
            assert_eq!(fmt_sample(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn short_row_is_reported() {
        let spec = small_spec();
        let mut buf = Vec::new();
        write_trial(&mut buf, &trial(&spec), &spec).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        // data row 3 sits after 5 header lines and the channel row
        let at = 5 + 1 + 2;
        let cut = lines[at].rfind(',').unwrap();
        lines[at].truncate(cut);
        let err = read_trial(lines.join("\n").as_bytes(), &spec).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(err.to_string().contains("13"), "{err}");
    }

    #[test]
    fn bridge_frames_round_trip() {
        let frames = [
            BridgeMessage::Cmd {
                label: CommandLabel(1),
                name: "delete_all".into(),
                tally: 3.875,
            },
            BridgeMessage::Err {
                code: "shape".into(),
                detail: "dimension mismatch: expected 1285, got 12".into(),
            },
            BridgeMessage::End,
        ];
        for f in frames {
            let text = f.to_string();
            assert_eq!(text.parse::<BridgeMessage>().unwrap(), f, "{text}");
        }
        assert_eq!(
            BridgeMessage::Cmd {
                label: CommandLabel(0),
                name: "create cube".into(),
                tally: 1.0
            }
            .to_string(),
            "CMD 0 create_cube 1"
        );
        assert!("CMD x y 1".parse::<BridgeMessage>().is_err());
        assert!("HELLO".parse::<BridgeMessage>().is_err());
    }

    #[test]
    fn key_path_reporting() {
        let text = "[preprocess]\nharmonics = [1, 99]\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("preprocess.harmonics"), "{err}");
        let err = parse_config("[recording]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("recording"), "{err}");
    }
}
