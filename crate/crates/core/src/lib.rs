//! Edge traffic-monitoring agent.
//!
//! Sampled packets are turned into 224x224 images, classified into seven
//! application classes by a small CNN (or a port heuristic), and counted in
//! per-class gauges that are exposed for scraping next to host CPU and
//! memory gauges.
//!
//! | module | role |
//! |---|---|
//! | [`pcap`] | classic pcap files, flow keys, packet sources |
//! | [`vision`] | packet bytes to images, PPM/PGM output |
//! | [`nn`] | `.vnn` models, forward pass, parameter and FLOP accounting |
//! | [`classify`] | traffic classes, model and heuristic classifiers |
//! | [`metrics`] | gauge registry, exposition format, HTTP endpoint, push |
//! | [`pipeline`] | source, sampling, classification workers, registry |
//! | [`bench`] | latency and CPU measurement, model comparison reports |
//! | [`dataset`] | pcap to labelled image trees |
//!
//! The `examples/` directory has one runnable program per capability; the
//! `vinevi` binary wraps the same library in subcommands.

pub mod bench;
pub mod classify;
pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod nn;
pub mod pcap;
pub mod pipeline;
pub mod tensor;
pub mod vision;

pub use classify::{ClassificationResult, Classifier, ModelClassifier, TrafficClass};
pub use nn::{load_model, ClassScores, Model};
pub use pcap::RawPacket;
pub use vision::{packet_to_image, PacketImage};
