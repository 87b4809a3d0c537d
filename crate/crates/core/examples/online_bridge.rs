//! Streams classifications to a TCP client the way a headset display
//! would consume them: one `CMD <label> <name> <tally>` line per trial,
//! `ERR` for trials that cannot be classified, `END` when done.
//!
//! The client half here is the reference implementation of the wire
//! format; any line-oriented reader works.

use std::io::{BufRead, BufReader};
use std::net::{TcpListener, TcpStream};
use std::thread;

use ssvep_ensemble::ensemble::{build_ensemble, default_classifiers, default_configs};
use ssvep_ensemble::io::{serve_commands, BridgeMessage};
use ssvep_ensemble::preprocess::PreprocessConfig;
use ssvep_ensemble::protocol::{make_offline_schedule, split_subjectwise_stratified, OnlineTrial};
use ssvep_ensemble::synth::{synth_dataset, SubjectProfile};
use ssvep_ensemble::types::default_stimuli;
use ssvep_ensemble::RecordingSpec;

fn client(addr: std::net::SocketAddr) -> anyhow::Result<usize> {
    let stream = TcpStream::connect(addr)?;
    let mut frames = 0;
    for line in BufReader::new(stream).lines() {
        let msg: BridgeMessage = line?.parse()?;
        frames += 1;
        match &msg {
            BridgeMessage::Cmd { name, tally, .. } => {
                println!("client: run `{name}` (weight {tally:.2})")
            }
            BridgeMessage::Err { code, detail } => {
                println!("client: skipped trial ({code}: {detail})")
            }
            BridgeMessage::End => break,
        }
    }
    Ok(frames)
}

fn main() -> anyhow::Result<()> {
    let spec = RecordingSpec::default();
    let stimuli = default_stimuli();
    let ds = synth_dataset(
        &SubjectProfile::moderate(5),
        &make_offline_schedule(5),
        &stimuli,
        &spec,
    )?;
    let (train, test) = split_subjectwise_stratified(&ds, 0.8, 5)?;
    let model = build_ensemble(
        &train,
        &spec,
        &stimuli,
        &default_classifiers(5),
        &default_configs(&PreprocessConfig::default()),
    )?;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    println!("server: listening on {addr}");
    let reader = thread::spawn(move || client(addr));

    let mut source: Vec<_> = test
        .into_iter()
        .take(8)
        .map(|t| Ok(OnlineTrial::from(t)))
        .collect();
    // one damaged trial to show the error frame
    if let Some(Ok(t)) = source.get_mut(3) {
        t.samples[[0, 0]] = f64::NAN;
    }
    let report = serve_commands(&listener, &model, source)?;
    let frames = reader.join().expect("client thread")?;
    println!(
        "server: {} commands, {} errors, {} frames delivered, accuracy {:.0}%",
        report.records.len(),
        report.errors,
        frames,
        100.0 * report.accuracy.unwrap_or(0.0)
    );
    if let Some(s) = report.mean_classification_seconds {
        println!("server: mean classification time {:.1} ms", 1000.0 * s);
    }
    Ok(())
}
