//! Classify every packet of a pcap with the port heuristic or a model.
//!
//!     cargo run --example classify_pcap -- capture.pcap [model.vnn]
//!
//! Without arguments a mixed synthetic capture is used.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use vinevi::classify::Classifier;
use vinevi::nn::load_model;
use vinevi::pcap::{read_pcap, synth, LINKTYPE_ETHERNET};
use vinevi::vision::TransformConfig;
use vinevi::ModelClassifier;

fn main() {
    let mut args = std::env::args().skip(1);
    let (link, packets) = match args.next() {
        Some(path) => {
            let (meta, packets) = read_pcap(&std::fs::read(path).unwrap()).unwrap();
            (meta.link_type, packets)
        }
        None => {
            let frames = synth::mixed_frames(21).into_iter().map(|(_, f)| f).collect();
            (
                LINKTYPE_ETHERNET,
                synth::stamp(frames, Duration::ZERO, Duration::from_millis(1)),
            )
        }
    };
    let classifier = match args.next() {
        Some(model) => {
            let model = Arc::new(load_model(model).unwrap());
            Classifier::Model(ModelClassifier::new(model, TransformConfig::default()).unwrap())
        }
        None => Classifier::Heuristic,
    };

    println!("classifier: {}", classifier.describe());
    let mut totals = BTreeMap::new();
    for (i, pkt) in packets.iter().enumerate() {
        match classifier.classify(pkt, link) {
            Ok(r) => {
                println!(
                    "{i:>4} {:<11} {:.2} {:>8.3} ms",
                    r.class,
                    r.confidence,
                    r.latency.as_secs_f64() * 1e3
                );
                *totals.entry(r.class).or_insert(0) += 1;
            }
            Err(e) => println!("{i:>4} error: {e}"),
        }
    }
    println!("{totals:?}");
}
