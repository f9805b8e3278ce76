//! The monitoring loop: packet source, sampling policy, classification
//! workers, gauge registry.
//!
//! One reader thread pulls packets from the source and applies the sampling
//! policy. Sampled packets go through a bounded queue to the workers, which
//! classify them and record the result in the shared [`Registry`]. File
//! replays block when the queue is full; live captures drop and count the
//! drop in `vinevi_dropped_packets`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{Classifier, ClassifyError, ModelClassifier, TrafficClass};
use crate::metrics::{self, HostSampler, MetricsError, PushHandle, Registry, ServerHandle};
use crate::nn::{load_model, NnError};
use crate::pcap::{open_live, FileSource, Paced, PacketSource, PcapError, RawPacket};
use crate::vision::TransformConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("source: {0}")]
    Source(#[from] PcapError),
    #[error("model: {0}")]
    Model(#[from] NnError),
    #[error("classifier: {0}")]
    Classifier(#[from] ClassifyError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Which packets get classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingPolicy {
    #[default]
    All,
    /// Packets whose index is a multiple of `n`.
    OneInN(u64),
    /// The first `budget` packets of every `period` of capture time.
    TimePool { period: Duration, budget: u64 },
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<(), PipelineError> {
        match *self {
            SamplingPolicy::OneInN(0) => Err(PipelineError::Config("one-in-n needs n >= 1".into())),
            SamplingPolicy::TimePool { period, .. } if period.is_zero() => {
                Err(PipelineError::Config("pool period must be positive".into()))
            }
            SamplingPolicy::TimePool { budget: 0, .. } => {
                Err(PipelineError::Config("pool budget must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `all`, `1/N`, or `pool:<period>:<budget>` (period like `1s`, `500ms`).
impl FromStr for SamplingPolicy {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            PipelineError::Config(format!(
                "bad sampling policy {s:?} (all | 1/N | pool:<period>:<budget>)"
            ))
        };
        let policy = if s == "all" {
            SamplingPolicy::All
        } else if let Some(n) = s.strip_prefix("1/") {
            SamplingPolicy::OneInN(n.parse().map_err(|_| bad())?)
        } else if let Some(rest) = s.strip_prefix("pool:") {
            let (period, budget) = rest.rsplit_once(':').ok_or_else(bad)?;
            SamplingPolicy::TimePool {
                period: humantime::parse_duration(period).map_err(|_| bad())?,
                budget: budget.parse().map_err(|_| bad())?,
            }
        } else {
            return Err(bad());
        };
        policy.validate()?;
        Ok(policy)
    }
}

impl fmt::Display for SamplingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            SamplingPolicy::All => "all".to_owned(),
            SamplingPolicy::OneInN(n) => format!("1/{n}"),
            SamplingPolicy::TimePool { period, budget } => {
                format!("pool:{}:{budget}", humantime::format_duration(*period))
            }
        };
        f.pad(&text)
    }
}

/// Sampling state for one packet stream.
#[derive(Debug, Clone)]
pub struct Sampler {
    policy: SamplingPolicy,
    period_start: Option<Duration>,
    taken_in_period: u64,
}

impl Sampler {
    pub fn new(policy: SamplingPolicy) -> Self {
        Sampler {
            policy,
            period_start: None,
            taken_in_period: 0,
        }
    }

    /// `index` counts every packet the source produced, from 0; `now` is the
    /// packet's capture time. Pool periods are anchored at the first packet.
    pub fn should_sample(&mut self, index: u64, now: Duration) -> bool {
        match self.policy {
            SamplingPolicy::All => true,
            SamplingPolicy::OneInN(n) => index.is_multiple_of(n),
            SamplingPolicy::TimePool { period, budget } => {
                let start = *self.period_start.get_or_insert(now);
                if now >= start + period {
                    let k = (now - start).as_nanos() / period.as_nanos();
                    let advance = period.as_nanos() * k;
                    self.period_start = Some(start + Duration::from_nanos(advance as u64));
                    self.taken_in_period = 0;
                }
                if self.taken_in_period < budget {
                    self.taken_in_period += 1;
                    true
                } else {
                    false
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceConfig {
    Pcap { path: PathBuf, pace: bool },
    Live { iface: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierConfig {
    Heuristic,
    Model(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushConfig {
    pub url: String,
    pub job: String,
    pub interval: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub source: SourceConfig,
    pub sampling: SamplingPolicy,
    pub classifier: ClassifierConfig,
    pub window: Duration,
    pub listen: Option<String>,
    pub push: Option<PushConfig>,
    pub workers: usize,
    pub queue_capacity: usize,
    /// Results below this confidence are not recorded in the gauges.
    pub min_confidence: f64,
    /// Stop after this many sampled packets.
    pub limit: Option<u64>,
    /// Keep serving after a file source is exhausted, until shutdown.
    pub linger: bool,
    /// Refresh host gauges at this interval; `None` disables host metrics.
    pub host_interval: Option<Duration>,
}

impl PipelineConfig {
    pub fn new(source: SourceConfig, classifier: ClassifierConfig) -> Self {
        PipelineConfig {
            source,
            sampling: SamplingPolicy::All,
            classifier,
            window: metrics::DEFAULT_WINDOW,
            listen: None,
            push: None,
            workers: 1,
            queue_capacity: 256,
            min_confidence: 0.0,
            limit: None,
            linger: false,
            host_interval: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.sampling.validate()?;
        if self.workers == 0 {
            return Err(PipelineError::Config("worker count must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            return Err(PipelineError::Config("queue capacity must be at least 1".into()));
        }
        if self.window.is_zero() {
            return Err(PipelineError::Config("window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(PipelineError::Config("min confidence must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Open the source named by `cfg`. Paced and live sources watch `stop`.
pub fn open_source(cfg: &SourceConfig, stop: &ShutdownToken) -> Result<Box<dyn PacketSource>, PipelineError> {
    Ok(match cfg {
        SourceConfig::Pcap { path, pace: false } => Box::new(FileSource::open(path)?),
        SourceConfig::Pcap { path, pace: true } => Box::new(Paced::new(FileSource::open(path)?, stop.0.clone())),
        SourceConfig::Live { iface } => open_live(iface, stop.0.clone())?,
    })
}

/// Load the classifier named by `cfg`.
pub fn build_classifier(cfg: &ClassifierConfig) -> Result<Classifier, PipelineError> {
    Ok(match cfg {
        ClassifierConfig::Heuristic => Classifier::Heuristic,
        ClassifierConfig::Model(path) => {
            let model = Arc::new(load_model(path)?);
            Classifier::Model(ModelClassifier::new(model, TransformConfig::default())?)
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub packets_seen: u64,
    pub packets_sampled: u64,
    /// Sampled packets that produced a class.
    pub classified: u64,
    /// Sampled packets the classifier rejected (e.g. empty frames).
    pub failed: u64,
    /// Classified but below the confidence threshold, so not recorded.
    pub below_threshold: u64,
    /// Live packets dropped on a full queue.
    pub dropped: u64,
    /// Results recorded in the gauges, per class.
    pub per_class: BTreeMap<TrafficClass, u64>,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    /// The run ended early on a source error; counts are partial.
    pub partial: bool,
    pub error: Option<String>,
    /// Exposition body rendered after the final window closed.
    #[serde(skip)]
    pub final_exposition: String,
}

impl RunSummary {
    pub fn recorded(&self) -> u64 {
        self.per_class.values().sum()
    }
}

#[derive(Debug, Default)]
struct WorkerStats {
    per_class: [u64; TrafficClass::COUNT],
    classified: u64,
    failed: u64,
    below: u64,
    latency_sum: Duration,
    latency_max: Duration,
}

#[derive(Debug, Default)]
struct ReaderStats {
    seen: u64,
    sampled: u64,
    dropped: u64,
    error: Option<PcapError>,
}

/// Cloneable stop flag, safe to trigger from a signal handler thread.
#[derive(Debug, Clone, Default)]
pub struct ShutdownToken(Arc<AtomicBool>);

impl ShutdownToken {
    pub fn trigger(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_triggered(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// A configured but not yet running pipeline. Startup errors (source,
/// model, configuration) surface here.
pub struct Pipeline {
    cfg: PipelineConfig,
    source: Box<dyn PacketSource>,
    classifier: Classifier,
    registry: Arc<Registry>,
    stop: ShutdownToken,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let stop = ShutdownToken::default();
        let source = open_source(&cfg.source, &stop)?;
        let classifier = build_classifier(&cfg.classifier)?;
        Ok(Self::assemble(cfg, source, classifier, stop))
    }

    /// Use an already opened source and classifier; `cfg.source` and
    /// `cfg.classifier` are ignored.
    pub fn with_parts(
        cfg: PipelineConfig,
        source: Box<dyn PacketSource>,
        classifier: Classifier,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        Ok(Self::assemble(cfg, source, classifier, ShutdownToken::default()))
    }

    fn assemble(
        cfg: PipelineConfig,
        source: Box<dyn PacketSource>,
        classifier: Classifier,
        stop: ShutdownToken,
    ) -> Self {
        let registry = Arc::new(Registry::new(cfg.window));
        Pipeline {
            cfg,
            source,
            classifier,
            registry,
            stop,
        }
    }

    pub fn registry(&self) -> Arc<Registry> {
        self.registry.clone()
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    /// Token that stops the pipeline once started; triggering it early makes
    /// the run end immediately.
    pub fn shutdown_token(&self) -> ShutdownToken {
        self.stop.clone()
    }

    pub fn start(self) -> Result<PipelineHandle, PipelineError> {
        let Pipeline {
            cfg,
            mut source,
            classifier,
            registry,
            stop,
        } = self;
        let server = match &cfg.listen {
            Some(addr) => Some(metrics::serve(registry.clone(), addr.as_str())?),
            None => None,
        };
        let pusher = match &cfg.push {
            Some(p) => Some(metrics::push(registry.clone(), &p.url, &p.job, p.interval)?),
            None => None,
        };
        let host = cfg.host_interval.map(|i| HostSampler::spawn(registry.clone(), i));

        let (tx, rx) = bounded::<RawPacket>(cfg.queue_capacity);
        let classifier = Arc::new(classifier);
        let link_type = source.link_type();
        let workers = (0..cfg.workers)
            .map(|i| {
                let rx = rx.clone();
                let classifier = classifier.clone();
                let registry = registry.clone();
                let min_confidence = cfg.min_confidence;
                thread::Builder::new()
                    .name(format!("classify-{i}"))
                    .spawn(move || worker(rx, &classifier, &registry, link_type, min_confidence))
                    .expect("spawn worker")
            })
            .collect();
        drop(rx);

        let reader = {
            let stop = stop.clone();
            let registry = registry.clone();
            let sampling = cfg.sampling;
            let limit = cfg.limit;
            let linger = cfg.linger;
            thread::Builder::new()
                .name("packet-reader".into())
                .spawn(move || read_loop(&mut *source, tx, &stop, &registry, sampling, limit, linger))
                .expect("spawn reader")
        };

        Ok(PipelineHandle {
            stop,
            registry,
            reader: Some(reader),
            workers,
            server,
            pusher,
            host,
        })
    }
}

fn read_loop(
    source: &mut dyn PacketSource,
    tx: Sender<RawPacket>,
    stop: &ShutdownToken,
    registry: &Registry,
    sampling: SamplingPolicy,
    limit: Option<u64>,
    linger: bool,
) -> ReaderStats {
    let mut stats = ReaderStats::default();
    let mut sampler = Sampler::new(sampling);
    let live = source.is_live();
    while !stop.is_triggered() && limit.is_none_or(|l| stats.sampled < l) {
        let pkt = match source.next_packet() {
            Ok(Some(p)) => p,
            Ok(None) => break,
            Err(e) => {
                log::error!("packet source failed after {} packets: {e}", stats.seen);
                stats.error = Some(e);
                break;
            }
        };
        let index = stats.seen;
        stats.seen += 1;
        if !sampler.should_sample(index, pkt.timestamp()) {
            continue;
        }
        if live {
            match tx.try_send(pkt) {
                Ok(()) => stats.sampled += 1,
                Err(TrySendError::Full(_)) => {
                    stats.dropped += 1;
                    registry.add_dropped(1);
                }
                Err(TrySendError::Disconnected(_)) => break,
            }
        } else {
            if tx.send(pkt).is_err() {
                break;
            }
            stats.sampled += 1;
        }
    }
    drop(tx);
    if linger && stats.error.is_none() {
        while !stop.is_triggered() {
            thread::sleep(Duration::from_millis(50));
        }
    }
    stats
}

fn worker(
    rx: Receiver<RawPacket>,
    classifier: &Classifier,
    registry: &Registry,
    link_type: u32,
    min_confidence: f64,
) -> WorkerStats {
    let mut stats = WorkerStats::default();
    for pkt in rx {
        match classifier.classify(&pkt, link_type) {
            Ok(r) => {
                stats.classified += 1;
                stats.latency_sum += r.latency;
                stats.latency_max = stats.latency_max.max(r.latency);
                if r.confidence >= min_confidence {
                    registry.record(r.class, u64::from(pkt.original_len), registry.now());
                    stats.per_class[r.class.index()] += 1;
                } else {
                    stats.below += 1;
                }
            }
            Err(e) => {
                log::debug!("classification failed: {e}");
                stats.failed += 1;
            }
        }
    }
    stats
}

/// A running pipeline.
pub struct PipelineHandle {
    stop: ShutdownToken,
    registry: Arc<Registry>,
    reader: Option<JoinHandle<ReaderStats>>,
    workers: Vec<JoinHandle<WorkerStats>>,
    server: Option<ServerHandle>,
    pusher: Option<PushHandle>,
    host: Option<HostSampler>,
}

impl PipelineHandle {
    /// Ask the pipeline to stop reading. Idempotent; packets already queued
    /// are still classified.
    pub fn shutdown(&self) {
        self.stop.trigger();
    }

    pub fn shutdown_token(&self) -> ShutdownToken {
        self.stop.clone()
    }

    pub fn registry(&self) -> Arc<Registry> {
        self.registry.clone()
    }

    /// Bound address of the metrics endpoint, if one was configured.
    pub fn metrics_addr(&self) -> Option<std::net::SocketAddr> {
        self.server.as_ref().map(ServerHandle::addr)
    }

    /// Wait for the source to finish (or for shutdown), drain the queue,
    /// close the final window and stop the endpoint.
    pub fn wait(mut self) -> RunSummary {
        let reader = self
            .reader
            .take()
            .map(|t| t.join().expect("reader thread panicked"))
            .unwrap_or_default();
        let mut totals = WorkerStats::default();
        for w in self.workers.drain(..) {
            let s = w.join().expect("worker thread panicked");
            for (t, c) in totals.per_class.iter_mut().zip(s.per_class) {
                *t += c;
            }
            totals.classified += s.classified;
            totals.failed += s.failed;
            totals.below += s.below;
            totals.latency_sum += s.latency_sum;
            totals.latency_max = totals.latency_max.max(s.latency_max);
        }
        self.registry.close_window(self.registry.now());
        let final_exposition = self.registry.render_exposition(self.registry.now());
        log::debug!("final window:\n{final_exposition}");
        if let Some(p) = self.pusher.take() {
            p.stop();
        }
        if let Some(h) = self.host.take() {
            h.stop();
        }
        if let Some(s) = self.server.take() {
            s.stop();
        }
        let mean_latency_ms = if totals.classified > 0 {
            totals.latency_sum.as_secs_f64() * 1e3 / totals.classified as f64
        } else {
            0.0
        };
        RunSummary {
            packets_seen: reader.seen,
            packets_sampled: reader.sampled,
            classified: totals.classified,
            failed: totals.failed,
            below_threshold: totals.below,
            dropped: reader.dropped,
            per_class: TrafficClass::ALL
                .into_iter()
                .map(|c| (c, totals.per_class[c.index()]))
                .collect(),
            mean_latency_ms,
            max_latency_ms: totals.latency_max.as_secs_f64() * 1e3,
            partial: reader.error.is_some(),
            error: reader.error.map(|e| e.to_string()),
            final_exposition,
        }
    }
}

impl Drop for PipelineHandle {
    fn drop(&mut self) {
        self.stop.trigger();
    }
}

/// Start, run to completion, and summarise.
pub fn run(cfg: PipelineConfig) -> Result<RunSummary, PipelineError> {
    Ok(Pipeline::new(cfg)?.start()?.wait())
}
