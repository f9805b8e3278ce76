//! Compare the toy models: size, FLOPs, latency with and without the image
//! transform, and optionally CPU share.
//!
//!     cargo run --release --example bench_models -- [iterations] [cpu_seconds]

use std::time::Duration;

use vinevi::bench::{compare_models, BenchOptions};
use vinevi::nn::zoo;
use vinevi::pcap::synth;

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations = args.next().map_or(30, |s| s.parse().unwrap());
    let cpu = args.next().map(|s| Duration::from_secs(s.parse().unwrap()));

    let paths: Vec<_> = zoo::NAMES.iter().map(|n| zoo::fixture_path(n)).collect();
    let packets: Vec<Vec<u8>> = synth::mixed_frames(32).into_iter().map(|(_, f)| f).collect();
    let opts = BenchOptions {
        iterations,
        warmup: 5,
        cpu_duration: cpu,
        ..BenchOptions::default()
    };
    let report = compare_models(&paths, &packets, &opts).unwrap();
    print!("{}", report.to_table());
}
