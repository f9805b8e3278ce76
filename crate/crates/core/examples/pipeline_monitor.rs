//! Run the full agent over a synthetic capture: sample, classify on two
//! workers, publish, then print the run summary and the final gauges.
//!
//!     cargo run --example pipeline_monitor -- [listen_addr]

use std::time::Duration;

use vinevi::pcap::synth;
use vinevi::pipeline::{run, ClassifierConfig, PipelineConfig, SamplingPolicy, SourceConfig};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mixed.pcap");
    let frames = synth::mixed_frames(700).into_iter().map(|(_, f)| f).collect();
    let packets = synth::stamp(frames, Duration::ZERO, Duration::from_millis(2));
    std::fs::write(&path, synth::ethernet_capture(&packets).unwrap()).unwrap();

    let mut cfg = PipelineConfig::new(SourceConfig::Pcap { path, pace: false }, ClassifierConfig::Heuristic);
    cfg.sampling = SamplingPolicy::OneInN(2);
    cfg.workers = 2;
    cfg.listen = std::env::args().nth(1);
    cfg.host_interval = Some(Duration::from_millis(200));

    let summary = run(cfg).unwrap();
    println!(
        "seen {} sampled {} classified {} mean latency {:.4} ms",
        summary.packets_seen, summary.packets_sampled, summary.classified, summary.mean_latency_ms
    );
    for (class, n) in &summary.per_class {
        println!("  {class:<11} {n}");
    }
    println!("\n{}", summary.final_exposition);
}
