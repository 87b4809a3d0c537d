//! Command-line surface: `synth`, `train`, `evaluate`, `online`, `report`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ensemble::build_ensemble;
use crate::error::Result;
use crate::io::{
    self, load_config, load_model, read_dataset, save_model, write_dataset, LineSink, ModelFile,
    RunConfig, SplitRecord,
};
use crate::metrics::{bits_per_trial, itr_for, TimeBase};
use crate::protocol::{
    compare_cohort, make_offline_schedule, run_offline_experiment, run_online_session,
    split_subjectwise_stratified, CohortComparison, ExperimentReport, OnlineReport, OnlineTrial,
};
use crate::synth::{synth_dataset, ArtifactSpec, SubjectProfile};
use crate::types::{SubjectDataset, TrialRecording, EMOTIV_CHANNELS};

#[derive(Debug, Parser)]
#[command(
    name = "ssvep",
    version,
    about = "SSVEP command recognition with a weighted SVM/random-forest ensemble"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic subject and write it as a dataset directory.
    Synth(SynthArgs),
    /// Fit the variant bank on the training split and save the model.
    Train(TrainArgs),
    /// Split, train, score every variant and the ensemble on held-out trials.
    Evaluate(EvaluateArgs),
    /// Classify trials one by one, printing or serving bridge frames.
    Online(OnlineArgs),
    /// Render saved reports as tables, or reconcile an accuracy into ITR.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileKind {
    Clean,
    Moderate,
    PureNoise,
    /// Moderate noise with per-subject variation drawn from the seed.
    Sampled,
    /// The `[subject]` table of the configuration.
    Config,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "sampled")]
    pub profile: ProfileKind,
    /// Subject seed; also seeds the trial schedule unless the config sets one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add blink and head-motion artifacts at the default rates.
    #[arg(long)]
    pub artifacts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelSet {
    /// Whatever the configuration lists (O1 and O2 by default).
    Config,
    /// All fourteen headset electrodes.
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Train on every trial instead of the training split.
    #[arg(long)]
    pub all: bool,
    #[arg(long, value_enum, default_value = "config")]
    pub channels: ChannelSet,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Machine-readable report (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "config")]
    pub channels: ChannelSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    Test,
    Train,
    All,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory to replay.
    #[arg(long)]
    pub data: PathBuf,
    /// Which trials to replay; `test` and `train` use the split stored in
    /// the model file.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    /// Serve frames over TCP instead of printing them; without a value the
    /// configured address is used.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    pub listen: Option<String>,
    /// Session report (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Zero the wall-clock fields so repeated runs give identical reports.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment reports written by `evaluate`; several give a cohort table.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Recompute ITR under this base: `stimulation:<s>` or `compute:<s>`.
    #[arg(long)]
    pub time_base: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
    /// Print the ITR for this accuracy instead of rendering reports.
    #[arg(long)]
    pub accuracy: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub commands: usize,
}

pub fn parse_time_base(s: &str) -> anyhow::Result<TimeBase> {
    let (kind, secs) = s
        .split_once(':')
        .context("time base must look like `stimulation:5` or `compute:0.386`")?;
    let secs: f64 = secs
        .parse()
        .with_context(|| format!("bad seconds `{secs}`"))?;
    let base = match kind {
        "stimulation" => TimeBase::Stimulation { seconds: secs },
        "compute" => TimeBase::Compute {
            seconds_per_classification: secs,
        },
        other => bail!("unknown time base `{other}`"),
    };
    base.classifications_per_minute()?;
    Ok(base)
}

fn load_run_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn with_channels(mut cfg: RunConfig, set: ChannelSet) -> RunConfig {
    if set == ChannelSet::All {
        cfg.preprocess.channels = EMOTIV_CHANNELS.iter().map(|c| c.to_string()).collect();
    }
    cfg
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_run_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(&cfg, a),
        Command::Train(a) => train(&with_channels(cfg, a.channels), a),
        Command::Evaluate(a) => evaluate(&with_channels(cfg, a.channels), a),
        Command::Online(a) => online(&cfg, a),
        Command::Report(a) => report(a),
    }
}

pub fn profile_for(kind: ProfileKind, seed: u64, cfg: &RunConfig) -> SubjectProfile {
    match kind {
        ProfileKind::Clean => SubjectProfile::clean(seed),
        ProfileKind::Moderate => SubjectProfile::moderate(seed),
        ProfileKind::PureNoise => SubjectProfile::pure_noise(seed),
        ProfileKind::Sampled => SubjectProfile::sampled(seed),
        ProfileKind::Config => SubjectProfile {
            seed,
            ..cfg.subject.clone()
        },
    }
}

fn synth(cfg: &RunConfig, a: SynthArgs) -> anyhow::Result<()> {
    let mut profile = profile_for(a.profile, a.seed, cfg);
    if a.artifacts {
        profile.artifacts = ArtifactSpec::default();
    }
    let schedule_seed = if cfg.protocol.schedule_seed != 0 {
        cfg.protocol.schedule_seed
    } else {
        a.seed
    };
    log::info!(
        "synthesising `{}` with seed {} (schedule seed {schedule_seed})",
        profile.name,
        a.seed
    );
    let schedule = make_offline_schedule(schedule_seed);
    let ds = synth_dataset(&profile, &schedule, &cfg.stimuli, &cfg.recording)?;
    write_dataset(&a.out, &ds)?;
    println!("wrote {} trials to {}", ds.trials.len(), a.out.display());
    Ok(())
}

fn load_dataset(dir: &Path) -> anyhow::Result<SubjectDataset> {
    read_dataset(dir).with_context(|| format!("reading dataset {}", dir.display()))
}

fn split(
    cfg: &RunConfig,
    ds: &SubjectDataset,
) -> Result<(Vec<TrialRecording>, Vec<TrialRecording>)> {
    log::info!(
        "split seed {}, train fraction {}",
        cfg.protocol.split_seed,
        cfg.protocol.train_fraction
    );
    split_subjectwise_stratified(ds, cfg.protocol.train_fraction, cfg.protocol.split_seed)
}

fn train(cfg: &RunConfig, a: TrainArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.data)?;
    let (trials, record) = if a.all {
        (ds.trials.clone(), None)
    } else {
        let (train, _) = split(cfg, &ds)?;
        let record = SplitRecord {
            train_fraction: cfg.protocol.train_fraction,
            seed: cfg.protocol.split_seed,
            subject_id: ds.subject_id().unwrap_or("").to_string(),
        };
        (train, Some(record))
    };
    let model = build_ensemble(
        &trials,
        &ds.spec,
        &ds.stimuli,
        &cfg.classifiers,
        &cfg.preprocess_configs(),
    )?;
    for (name, w) in model.variant_names().iter().zip(&model.weights) {
        log::info!("{name}: training accuracy {w:.4}");
    }
    save_model(&a.out, &ModelFile::new(model, record))?;
    println!(
        "trained on {} trials, model saved to {}",
        trials.len(),
        a.out.display()
    );
    Ok(())
}

fn evaluate(cfg: &RunConfig, a: EvaluateArgs) -> anyhow::Result<()> {
    let ds = load_dataset(&a.data)?;
    let report = run_offline_experiment(&ds, &cfg.experiment())?;
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    print!("{}", render_experiment(&report, TableFormat::Text));
    Ok(())
}

fn online(cfg: &RunConfig, a: OnlineArgs) -> anyhow::Result<()> {
    let file = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let trials = match (a.split, &file.split) {
        (SplitPart::All, _) => ds.trials.clone(),
        (part, Some(s)) => {
            let (train, test) = split_subjectwise_stratified(&ds, s.train_fraction, s.seed)?;
            if part == SplitPart::Test {
                test
            } else {
                train
            }
        }
        (_, None) => bail!("model was trained on all trials; replay with `--split all`"),
    };
    let source = trials.into_iter().map(|t| Ok(OnlineTrial::from(t)));
    let report = match &a.listen {
        Some(addr) => {
            let addr = if addr.is_empty() {
                cfg.online.listen.as_str()
            } else {
                addr.as_str()
            };
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            log::info!("serving commands on {}", listener.local_addr()?);
            eprintln!("listening on {}", listener.local_addr()?);
            io::serve_commands(&listener, &file.model, source)?
        }
        None => {
            let stdout = std::io::stdout();
            let mut sink = LineSink::new(stdout.lock());
            let report = run_online_session(&file.model, source, &mut sink)?;
            let _ = sink.finish()?;
            report
        }
    };
    let report = if a.no_timing {
        report.without_timing()
    } else {
        report
    };
    if let Some(path) = &a.report {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    eprint!("{}", render_online(&report, file.model.n_labels()));
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let base = a.time_base.as_deref().map(parse_time_base).transpose()?;
    let mut out = std::io::stdout().lock();
    if let Some(p) = a.accuracy {
        let base = base.unwrap_or_default();
        write!(out, "{}", render_itr(p, a.commands, &base)?)?;
        return Ok(());
    }
    if a.inputs.is_empty() {
        bail!("give at least one --input report or an --accuracy");
    }
    let mut reports = Vec::new();
    for path in &a.inputs {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut r: ExperimentReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(b) = &base {
            rebase(&mut r, b)?;
        }
        reports.push(r);
    }
    for r in &reports {
        write!(out, "{}", render_experiment(r, a.format))?;
    }
    if reports.len() > 1 {
        write!(
            out,
            "{}",
            render_cohort(&compare_cohort(&reports), a.format)
        )?;
    }
    Ok(())
}

/// Recomputes every ITR column of `r` under `base`.
pub fn rebase(r: &mut ExperimentReport, base: &TimeBase) -> Result<()> {
    let n = r.commands.len();
    for v in r
        .variants
        .iter_mut()
        .chain(std::iter::once(&mut r.ensemble))
    {
        v.itr_bits_per_minute = itr_for(v.accuracy, n, base)?;
    }
    r.time_base = *base;
    Ok(())
}

pub fn render_itr(p: f64, n: usize, base: &TimeBase) -> Result<String> {
    let b = bits_per_trial(p, n)?;
    let q = base.classifications_per_minute()?;
    let itr = itr_for(p, n, base)?;
    Ok(format!(
        "accuracy {p:.4}, {n} commands: {b:.4} bits/trial\n\
         time base: {}\n\
         {q:.2} classifications/min -> ITR {itr:.3} bits/min\n",
        base.describe()
    ))
}

fn table(format: TableFormat, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header).expect("in-memory write");
            for r in rows {
                w.write_record(r).expect("in-memory write");
            }
            s.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
        }
        TableFormat::Markdown => {
            let _ = writeln!(s, "| {} |", header.join(" | "));
            let _ = writeln!(
                s,
                "|{}|",
                header.iter().map(|_| "---").collect::<Vec<_>>().join("|")
            );
            for r in rows {
                let _ = writeln!(s, "| {} |", r.join(" | "));
            }
        }
        TableFormat::Text => {
            let widths: Vec<usize> = (0..header.len())
                .map(|c| {
                    rows.iter()
                        .map(|r| r[c].len())
                        .chain(std::iter::once(header[c].len()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |cells: Vec<&str>| {
                cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, w))| {
                        if i == 0 {
                            format!("{c:<w$}")
                        } else {
                            format!("{c:>w$}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let _ = writeln!(s, "{}", line(header.to_vec()));
            let _ = writeln!(
                s,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
            );
            for r in rows {
                let _ = writeln!(s, "{}", line(r.iter().map(String::as_str).collect()));
            }
        }
    }
    s
}

fn bar(p: f64) -> String {
    let n = (p.clamp(0.0, 1.0) * 20.0).round() as usize;
    format!("{}{}", "#".repeat(n), ".".repeat(20 - n))
}

/// Variant table with one row per variant and a final ensemble row.
pub fn render_experiment(r: &ExperimentReport, format: TableFormat) -> String {
    let mut rows: Vec<Vec<String>> = r
        .variants
        .iter()
        .chain(std::iter::once(&r.ensemble))
        .map(|v| {
            vec![
                v.name.clone(),
                format!("{:.2}", 100.0 * v.training_accuracy),
                format!("{:.2}", 100.0 * v.accuracy),
                format!("{:.2}", v.itr_bits_per_minute),
            ]
        })
        .collect();
    if format == TableFormat::Text {
        for (row, v) in rows
            .iter_mut()
            .zip(r.variants.iter().chain(std::iter::once(&r.ensemble)))
        {
            row.push(bar(v.accuracy));
        }
    }
    // csv has no preamble, so the time base travels in the column name
    let itr_header = match format {
        TableFormat::Csv => format!("ITR bits/min [{}]", r.time_base.describe()),
        _ => "ITR bits/min".to_string(),
    };
    let mut header = vec!["variant", "train %", "test %", itr_header.as_str()];
    if format == TableFormat::Text {
        header.push("test accuracy");
    }
    let mut s = String::new();
    if format != TableFormat::Csv {
        let _ = writeln!(
            s,
            "subject {}: {} train / {} test trials",
            r.subject_id, r.n_train, r.n_test
        );
        let _ = writeln!(s, "ITR time base: {}", r.time_base.describe());
    }
    s.push_str(&table(format, &header, &rows));
    if format != TableFormat::Csv {
        let _ = writeln!(s, "\nconfusion (rows = true, columns = predicted):");
        let mut conf_header = vec!["true"];
        conf_header.extend(r.commands.iter().map(String::as_str));
        let conf_rows: Vec<Vec<String>> = r
            .confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                std::iter::once(r.commands.get(i).cloned().unwrap_or_default())
                    .chain(row.iter().map(|c| c.to_string()))
                    .collect()
            })
            .collect();
        s.push_str(&table(format, &conf_header, &conf_rows));
        let sig = &r.significance;
        match &sig.test {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "\nensemble vs {}: t = {:.3}, p = {:.4} ({})",
                    sig.compared_with, t.t, t.p_value, sig.note
                );
            }
            None => {
                let _ = writeln!(s, "\nensemble vs {}: {}", sig.compared_with, sig.note);
            }
        }
        s.push('\n');
    }
    s
}

pub fn render_cohort(c: &CohortComparison, format: TableFormat) -> String {
    let rows: Vec<Vec<String>> = c
        .subjects
        .iter()
        .zip(c.ensemble.iter().zip(&c.best_individual))
        .map(|(s, (e, b))| {
            vec![
                s.clone(),
                format!("{:.2}", 100.0 * e),
                format!("{:.2}", 100.0 * b),
            ]
        })
        .chain(std::iter::once(vec![
            "mean".to_string(),
            format!("{:.2}", 100.0 * c.mean_ensemble),
            format!("{:.2}", 100.0 * c.mean_best_individual),
        ]))
        .collect();
    let mut s = table(
        format,
        &["subject", "ensemble %", "best individual %"],
        &rows,
    );
    if format != TableFormat::Csv {
        match &c.test {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "paired t-test: t = {:.3}, df = {}, p = {:.4}",
                    t.t, t.df, t.p_value
                );
            }
            None => {
                let _ = writeln!(s, "paired t-test: {}", c.note);
            }
        }
    }
    s
}

pub fn render_online(r: &OnlineReport, n_labels: usize) -> String {
    let mut s = format!("{} commands, {} errors", r.records.len(), r.errors);
    if let Some(acc) = r.accuracy {
        let _ = write!(
            s,
            ", accuracy {:.2}% over {} labelled trials",
            100.0 * acc,
            r.n_labeled
        );
        if let Some(base) = r.compute_time_base() {
            if let Ok(itr) = itr_for(acc, n_labels, &base) {
                let _ = write!(s, ", ITR {itr:.2} bits/min ({})", base.describe());
            }
        }
    }
    s.push('\n');
    s
}
