//! Per-class traffic gauges, host gauges, and their publication.
//!
//! Gauges are rendered in the text exposition format (0.0.4), served on
//! `GET /metrics`, and optionally pushed to a pushgateway-style collector.

mod gauge;
pub mod host;
mod push;
mod registry;
mod server;
mod window;

pub use gauge::{format_value, render, valid_metric_name, Gauge};
pub use host::{collect_host, HostError, HostMetrics, HostSampler};
pub use push::{push, push_once, push_url, PushHandle};
pub use registry::*;
pub use server::{serve, ServerHandle, CONTENT_TYPE};
pub use window::{total_packets, ClassCount, ClassCounts, ClassWindow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("BindError: {0}")]
    Bind(String),
    #[error("push: {0}")]
    Push(String),
}
