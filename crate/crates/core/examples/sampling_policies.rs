//! Which packets each sampling policy selects.
//!
//!     cargo run --example sampling_policies -- "pool:1s:2"

use std::time::Duration;

use vinevi::pipeline::{Sampler, SamplingPolicy};

fn show(policy: SamplingPolicy) {
    // 30 packets, four per second
    let mut sampler = Sampler::new(policy);
    let picked: Vec<u64> = (0..30u64)
        .filter(|&i| sampler.should_sample(i, Duration::from_millis(250 * i)))
        .collect();
    println!("{policy:<12} {:>2} of 30: {picked:?}", picked.len());
}

fn main() {
    match std::env::args().nth(1) {
        Some(s) => show(s.parse().unwrap()),
        None => {
            for s in ["all", "1/3", "1/10", "pool:1s:2", "pool:2s:1"] {
                show(s.parse().unwrap());
            }
        }
    }
}
