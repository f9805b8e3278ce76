//! Build a small labelled image dataset from synthetic per-class captures.
//!
//!     cargo run --example dataset -- [out_dir]

use std::time::Duration;

use vinevi::dataset::{build_dataset, DatasetEntry, DatasetOptions, SplitRatios};
use vinevi::pcap::synth::{self, CLASS_PORTS};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "dataset-out".into());
    let pcaps = tempfile::tempdir().unwrap();

    let mut entries = Vec::new();
    for (class, transport, port) in CLASS_PORTS {
        let frames = (0..20)
            .map(|i| synth::class_frame(transport, port, i, 40 + i as usize * 3))
            .collect();
        let packets = synth::stamp(frames, Duration::ZERO, Duration::from_millis(10));
        let path = pcaps.path().join(format!("{class}.pcap"));
        std::fs::write(&path, synth::ethernet_capture(&packets).unwrap()).unwrap();
        entries.push(DatasetEntry {
            pcap: path,
            label: class,
        });
    }

    let mut opts = DatasetOptions::new(entries, &out);
    opts.split = SplitRatios::new(0.7, 0.15, 0.15).unwrap();
    opts.seed = 42;
    let manifest = build_dataset(&opts).unwrap();
    println!("{}", serde_json::to_string_pretty(&manifest.split_counts).unwrap());
    println!("{} images under {out}", manifest.total);
}
