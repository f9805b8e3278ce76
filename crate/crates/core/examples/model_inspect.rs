//! Load a model, print its per-layer accounting and classify one packet.
//!
//!     cargo run --example model_inspect -- fixtures/tiny-res.vnn

use std::sync::Arc;
use std::time::Instant;

use vinevi::nn::{load_model, zoo};
use vinevi::pcap::synth;
use vinevi::vision::TransformConfig;
use vinevi::ModelClassifier;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| zoo::fixture_path(zoo::TINY_RES));
    let model = Arc::new(load_model(&path).unwrap());

    println!("{} ({})", model.name(), path.display());
    for r in model.layer_reports() {
        println!(
            "{}{:<40} {:>10} -> {:<10} {:>6} params {:>10} flops",
            "  ".repeat(r.depth),
            r.description,
            r.input.to_string(),
            r.output.to_string(),
            r.params,
            r.flops
        );
    }
    println!("params {}", model.param_count());
    println!("flops {}", model.flops_total());
    println!("last layer complexity {:.4}%", model.last_layer_complexity());

    let classifier = ModelClassifier::new(model, TransformConfig::default()).unwrap();
    let frame = synth::udp_ipv4(40000, 53, b"\x12\x34\x01\x00\x00\x01");
    let img = vinevi::packet_to_image(&frame, &TransformConfig::default()).unwrap();
    let start = Instant::now();
    let scores = classifier.scores(&img).unwrap();
    let elapsed = start.elapsed();
    for (label, p) in classifier.model().class_labels().iter().zip(scores.as_slice()) {
        println!("{label:<12} {p:.4}");
    }
    println!("forward pass {:.3} ms", elapsed.as_secs_f64() * 1e3);
}
