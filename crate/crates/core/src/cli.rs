//! The `vinevi` command line.
//!
//! Exit codes: 0 on success (and for `--help`), 1 when a run fails after
//! starting, 2 for usage and configuration errors, including models that do
//! not load.
//!
//! `monitor` and `classify` also read an optional TOML file (`--config`)
//! whose keys are the long flag names; flags given on the command line win.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, Once};
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{self, BenchOptions};
use crate::classify::TrafficClass;
use crate::dataset::{build_dataset, DatasetEntry, DatasetOptions, SplitRatios};
use crate::metrics::DEFAULT_WINDOW;
use crate::nn::{blob_float_count, decode_model, LayerReport};
use crate::pcap::synth;
use crate::pcap::{FileSource, PacketSource};
use crate::pipeline::{
    build_classifier, open_source, ClassifierConfig, Pipeline, PipelineConfig, PushConfig, Sampler, SamplingPolicy,
    ShutdownToken, SourceConfig,
};
use crate::tensor::Shape;
use crate::vision::ImageFormat;

#[derive(Debug, Parser)]
#[command(
    name = "vinevi",
    version,
    about = "Classify sampled packets as images and export per-class traffic gauges"
)]
pub struct Cli {
    /// More log output: -v debug, -vv trace.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the agent: classify sampled packets and serve or push gauges.
    Monitor(MonitorArgs),
    /// Classify packets once and print one line per sampled packet.
    Classify(ClassifyArgs),
    /// Turn labelled pcaps into an image dataset.
    Dataset(DatasetArgs),
    /// Compare prediction latency, CPU and size of models.
    Bench(BenchArgs),
    /// Print a model's layers, parameter and FLOP counts.
    ModelInfo(ModelInfoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Read packets from this pcap file.
    #[arg(long, conflicts_with = "iface")]
    pub pcap: Option<PathBuf>,
    /// Capture from this network interface (needs the `live` feature).
    #[arg(long)]
    pub iface: Option<String>,
    /// Classify with this .vnn model.
    #[arg(long, conflicts_with = "heuristic")]
    pub model: Option<PathBuf>,
    /// Classify by well-known ports instead of a model.
    #[arg(long)]
    pub heuristic: bool,
    /// Sampling policy: all, 1/N, or pool:<period>:<budget>.
    #[arg(long, value_name = "POLICY")]
    pub sample: Option<String>,
    /// Stop after this many sampled packets.
    #[arg(long)]
    pub limit: Option<u64>,
    /// TOML file with defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Serve /metrics on this address, e.g. 0.0.0.0:9155.
    #[arg(long)]
    pub listen: Option<String>,
    /// Push gauges to this pushgateway base URL.
    #[arg(long)]
    pub push_url: Option<String>,
    /// Job name for pushes [default: vinevi].
    #[arg(long)]
    pub job: Option<String>,
    /// Push interval [default: the window length].
    #[arg(long, value_name = "DURATION")]
    pub push_interval: Option<String>,
    /// Gauge window length [default: 10s].
    #[arg(long, value_name = "DURATION")]
    pub window: Option<String>,
    /// Classification worker threads [default: 1].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Do not record results below this confidence [default: 0].
    #[arg(long)]
    pub min_confidence: Option<f64>,
    /// Host CPU and memory refresh interval [default: the window length].
    #[arg(long, value_name = "DURATION")]
    pub host_interval: Option<String>,
    /// Do not export host CPU and memory gauges.
    #[arg(long)]
    pub no_host: bool,
    /// Replay a pcap at its capture timing.
    #[arg(long)]
    pub pace: bool,
    /// Exit once a pcap is exhausted instead of serving until interrupted.
    #[arg(long)]
    pub exit_on_eof: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Labelled input, repeatable.
    #[arg(long = "pcap", value_name = "CLASS=PATH", required = true)]
    pub pcaps: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Image format: ppm or pgm.
    #[arg(long, default_value = "ppm")]
    pub format: String,
    /// Train/val/test ratios.
    #[arg(long, default_value = "0.8/0.1/0.1")]
    pub split: String,
    /// Seed for split assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampling policy per pcap: all, 1/N, or pool:<period>:<budget>.
    #[arg(long, default_value = "all")]
    pub sample: String,
    /// At most this many images per pcap.
    #[arg(long)]
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Model to benchmark, repeatable.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Packets to predict on [default: a synthetic mix of all classes].
    #[arg(long)]
    pub pcap: Option<PathBuf>,
    /// Number of input packets.
    #[arg(long, default_value_t = 64)]
    pub limit: u64,
    /// Timed predictions per model.
    #[arg(long, default_value_t = bench::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Untimed predictions before timing.
    #[arg(long, default_value_t = bench::DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Also measure CPU for this long per model, e.g. 5s.
    #[arg(long, value_name = "DURATION")]
    pub duration: Option<String>,
    /// CPU sampling period.
    #[arg(long, value_name = "DURATION", default_value = "200ms")]
    pub cpu_period: String,
    /// Output format: table, json or csv (raw timings).
    #[arg(long, default_value = "table")]
    pub format: String,
    /// Also write report.json, report.txt and timings.csv here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelInfoArgs {
    /// Path to a .vnn model.
    pub path: PathBuf,
    /// Output format: text or json.
    #[arg(long, default_value = "text")]
    pub format: String,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub pcap: Option<PathBuf>,
    pub iface: Option<String>,
    pub model: Option<PathBuf>,
    pub heuristic: Option<bool>,
    pub sample: Option<String>,
    pub limit: Option<u64>,
    pub listen: Option<String>,
    pub push_url: Option<String>,
    pub job: Option<String>,
    pub push_interval: Option<String>,
    pub window: Option<String>,
    pub workers: Option<usize>,
    pub queue_capacity: Option<usize>,
    pub min_confidence: Option<f64>,
    pub host_interval: Option<String>,
    pub no_host: Option<bool>,
    pub pace: Option<bool>,
    pub exit_on_eof: Option<bool>,
}

/// Why a command failed, and so which exit code it gets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

pub fn load_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn parse_duration(flag: &str, s: &str) -> Result<Duration, Failure> {
    humantime::parse_duration(s).map_err(|e| usage(format!("--{flag} {s:?}: {e}")))
}

fn resolve_source(a: &SourceArgs, file: &FileConfig, pace: bool) -> Result<SourceConfig, Failure> {
    let (pcap, iface) = if a.pcap.is_some() || a.iface.is_some() {
        (a.pcap.clone(), a.iface.clone())
    } else {
        (file.pcap.clone(), file.iface.clone())
    };
    match (pcap, iface) {
        (Some(path), None) => Ok(SourceConfig::Pcap { path, pace }),
        (None, Some(iface)) => Ok(SourceConfig::Live { iface }),
        (Some(_), Some(_)) => Err(usage("give either --pcap or --iface, not both")),
        (None, None) => Err(usage("no packet source: give --pcap <FILE> or --iface <NAME>")),
    }
}

fn resolve_classifier(a: &SourceArgs, file: &FileConfig) -> Result<ClassifierConfig, Failure> {
    let (model, heuristic) = if a.model.is_some() || a.heuristic {
        (a.model.clone(), a.heuristic)
    } else {
        (file.model.clone(), file.heuristic.unwrap_or(false))
    };
    match (model, heuristic) {
        (Some(path), false) => Ok(ClassifierConfig::Model(path)),
        (None, true) => Ok(ClassifierConfig::Heuristic),
        (Some(_), true) => Err(usage("give either --model or --heuristic, not both")),
        (None, false) => Err(usage("no classifier: give --model <FILE> or --heuristic")),
    }
}

fn resolve_sampling(a: &SourceArgs, file: &FileConfig) -> Result<SamplingPolicy, Failure> {
    match a.sample.as_ref().or(file.sample.as_ref()) {
        Some(s) => s.parse().map_err(|e| usage(format!("--sample: {e}"))),
        None => Ok(SamplingPolicy::All),
    }
}

/// Build the pipeline configuration for `monitor` from flags over the file.
pub fn monitor_config(a: &MonitorArgs, file: &FileConfig) -> Result<PipelineConfig, Failure> {
    let pace = a.pace || file.pace.unwrap_or(false);
    let mut cfg = PipelineConfig::new(
        resolve_source(&a.source, file, pace)?,
        resolve_classifier(&a.source, file)?,
    );
    cfg.sampling = resolve_sampling(&a.source, file)?;
    cfg.limit = a.source.limit.or(file.limit);
    cfg.window = match a.window.as_ref().or(file.window.as_ref()) {
        Some(w) => parse_duration("window", w)?,
        None => DEFAULT_WINDOW,
    };
    cfg.listen = a.listen.clone().or_else(|| file.listen.clone());
    if let Some(url) = a.push_url.clone().or_else(|| file.push_url.clone()) {
        let interval = match a.push_interval.as_ref().or(file.push_interval.as_ref()) {
            Some(i) => parse_duration("push-interval", i)?,
            None => cfg.window,
        };
        cfg.push = Some(PushConfig {
            url,
            job: a
                .job
                .clone()
                .or_else(|| file.job.clone())
                .unwrap_or_else(|| "vinevi".into()),
            interval,
        });
    }
    if let Some(w) = a.workers.or(file.workers) {
        cfg.workers = w;
    }
    if let Some(q) = file.queue_capacity {
        cfg.queue_capacity = q;
    }
    if let Some(c) = a.min_confidence.or(file.min_confidence) {
        cfg.min_confidence = c;
    }
    cfg.host_interval = if a.no_host || file.no_host.unwrap_or(false) {
        None
    } else {
        match a.host_interval.as_ref().or(file.host_interval.as_ref()) {
            Some(i) => Some(parse_duration("host-interval", i)?),
            None => Some(cfg.window),
        }
    };
    cfg.linger = !(a.exit_on_eof || file.exit_on_eof.unwrap_or(false));
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

static ACTIVE: Mutex<Option<ShutdownToken>> = Mutex::new(None);
static HANDLER: Once = Once::new();

/// Route Ctrl-C and SIGTERM to `token`. A second signal exits at once.
fn on_interrupt(token: ShutdownToken) {
    HANDLER.call_once(|| {
        let installed = ctrlc::set_handler(|| {
            let active = ACTIVE.lock().map(|g| g.clone()).ok().flatten();
            match active {
                Some(t) if !t.is_triggered() => {
                    log::info!("interrupted, finishing up (interrupt again to exit now)");
                    t.trigger();
                }
                _ => std::process::exit(130),
            }
        });
        if let Err(e) = installed {
            log::warn!("cannot install interrupt handler: {e}");
        }
    });
    if let Ok(mut g) = ACTIVE.lock() {
        *g = Some(token);
    }
}

fn describe_source(s: &SourceConfig) -> String {
    match s {
        SourceConfig::Pcap { path, pace } => {
            format!("pcap {}{}", path.display(), if *pace { " (paced)" } else { "" })
        }
        SourceConfig::Live { iface } => format!("interface {iface}"),
    }
}

fn cmd_monitor(a: &MonitorArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let file = load_config(a.source.config.as_deref())?;
    let cfg = monitor_config(a, &file)?;
    let source = describe_source(&cfg.source);
    let (listen, push) = (cfg.listen.clone(), cfg.push.clone());
    let sampling = cfg.sampling;
    let window = cfg.window;
    let pipeline = Pipeline::new(cfg).map_err(usage)?;
    on_interrupt(pipeline.shutdown_token());
    let classifier = pipeline.classifier().describe();
    let handle = pipeline.start().map_err(runtime)?;
    log::info!(
        "monitoring {source} with {classifier}, sampling {sampling}, window {}",
        humantime::format_duration(window)
    );
    match handle.metrics_addr() {
        Some(_) => {}
        None if listen.is_none() && push.is_none() => {
            log::warn!("neither --listen nor --push-url given; gauges are not exported")
        }
        None => {}
    }
    if let Some(p) = &push {
        log::info!(
            "pushing to {} as job {} every {}",
            p.url,
            p.job,
            humantime::format_duration(p.interval)
        );
    }
    let summary = handle.wait();
    let json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    writeln!(out, "{json}").map_err(runtime)?;
    match summary.error {
        Some(e) => Err(Failure::Runtime(format!(
            "source failed after {} packets: {e}",
            summary.packets_seen
        ))),
        None => Ok(()),
    }
}

fn cmd_classify(a: &ClassifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let file = load_config(a.source.config.as_deref())?;
    let source_cfg = resolve_source(&a.source, &file, false)?;
    let classifier = build_classifier(&resolve_classifier(&a.source, &file)?).map_err(usage)?;
    let policy = resolve_sampling(&a.source, &file)?;
    let limit = a.source.limit.or(file.limit);
    let stop = ShutdownToken::default();
    let mut source = open_source(&source_cfg, &stop).map_err(usage)?;
    on_interrupt(stop.clone());
    let link = source.link_type();
    let mut sampler = Sampler::new(policy);
    let mut counts = [0u64; TrafficClass::COUNT];
    let (mut seen, mut sampled, mut failed) = (0u64, 0u64, 0u64);
    let mut error = None;
    while !stop.is_triggered() && limit.is_none_or(|l| sampled < l) {
        let pkt = match source.next_packet() {
            Ok(Some(p)) => p,
            Ok(None) => break,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        let index = seen;
        seen += 1;
        if !sampler.should_sample(index, pkt.timestamp()) {
            continue;
        }
        sampled += 1;
        match classifier.classify(&pkt, link) {
            Ok(r) => {
                counts[r.class.index()] += 1;
                writeln!(
                    out,
                    "{index} {} {:.2} {:.3}",
                    r.class,
                    r.confidence,
                    r.latency.as_secs_f64() * 1e3
                )
                .map_err(runtime)?;
            }
            Err(e) => {
                failed += 1;
                log::warn!("packet {index}: {e}");
            }
        }
    }
    let per_class: Vec<String> = TrafficClass::ALL
        .iter()
        .map(|c| format!("{c}={}", counts[c.index()]))
        .collect();
    writeln!(
        out,
        "summary packets={seen} sampled={sampled} failed={failed} {}",
        per_class.join(" ")
    )
    .map_err(runtime)?;
    match error {
        Some(e) => Err(Failure::Runtime(format!("source failed after {seen} packets: {e}"))),
        None => Ok(()),
    }
}

fn cmd_dataset(a: &DatasetArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let entries = a
        .pcaps
        .iter()
        .map(|s| s.parse::<DatasetEntry>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let mut opts = DatasetOptions::new(entries, &a.out);
    opts.format = a.format.parse::<ImageFormat>().map_err(usage)?;
    opts.split = a.split.parse::<SplitRatios>().map_err(usage)?;
    opts.seed = a.seed;
    opts.sampling = a.sample.parse().map_err(|e| usage(format!("--sample: {e}")))?;
    opts.limit = a.limit;
    let manifest = build_dataset(&opts).map_err(runtime)?;
    for (class, n) in &manifest.counts {
        writeln!(out, "{class} {n}").map_err(runtime)?;
    }
    writeln!(out, "total {} -> {}", manifest.total, a.out.display()).map_err(runtime)?;
    for e in &manifest.errors {
        log::error!(
            "{}{}: {}",
            e.pcap.display(),
            e.packet.map(|p| format!(" packet {p}")).unwrap_or_default(),
            e.error
        );
    }
    if manifest.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} input errors, see {}",
            manifest.errors.len(),
            a.out.join(crate::dataset::MANIFEST_FILE).display()
        )))
    }
}

fn bench_packets(a: &BenchArgs) -> Result<Vec<Vec<u8>>, Failure> {
    let n = a.limit.max(1) as usize;
    let Some(path) = &a.pcap else {
        return Ok(synth::mixed_frames(n).into_iter().map(|(_, f)| f).collect());
    };
    let mut src = FileSource::open(path).map_err(usage)?;
    let mut packets = Vec::new();
    while packets.len() < n {
        match src.next_packet().map_err(runtime)? {
            Some(p) if !p.data.is_empty() => packets.push(p.data),
            Some(_) => {}
            None => break,
        }
    }
    if packets.is_empty() {
        return Err(usage(format!("{} has no non-empty packets", path.display())));
    }
    Ok(packets)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if !matches!(a.format.as_str(), "table" | "json" | "csv") {
        return Err(usage(format!("--format {:?}: expected table, json or csv", a.format)));
    }
    let opts = BenchOptions {
        iterations: a.iterations,
        warmup: a.warmup,
        cpu_duration: a
            .duration
            .as_deref()
            .map(|d| parse_duration("duration", d))
            .transpose()?,
        cpu_sample_period: parse_duration("cpu-period", &a.cpu_period)?,
    };
    if let Some(d) = opts.cpu_duration {
        if d < opts.cpu_sample_period * 2 {
            return Err(usage("--duration must be at least twice --cpu-period"));
        }
    }
    let packets = bench_packets(a)?;
    let report = bench::compare_models(&a.models, &packets, &opts).map_err(usage)?;
    let text = match a.format.as_str() {
        "json" => report.to_json() + "\n",
        "csv" => report.timings_csv(),
        _ => report.to_table(),
    };
    out.write_all(text.as_bytes()).map_err(runtime)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(runtime)?;
        fs::write(dir.join("report.json"), report.to_json() + "\n").map_err(runtime)?;
        fs::write(dir.join("report.txt"), report.to_table()).map_err(runtime)?;
        fs::write(dir.join("timings.csv"), report.timings_csv()).map_err(runtime)?;
    }
    if !report.errors.is_empty() {
        log::warn!(
            "{} of {} models failed, see the report",
            report.errors.len(),
            a.models.len()
        );
    }
    Ok(())
}

/// Digits grouped by thousands: 1053703 -> "1,053,703".
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[derive(Debug, Serialize)]
struct ModelInfo<'a> {
    name: &'a str,
    class_labels: &'a [String],
    input: Shape,
    layers: Vec<LayerReport>,
    total_params: u64,
    total_flops: u64,
    blob_floats: usize,
    last_layer_complexity_percent: f64,
}

fn cmd_model_info(a: &ModelInfoArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if !matches!(a.format.as_str(), "text" | "json") {
        return Err(usage(format!("--format {:?}: expected text or json", a.format)));
    }
    let bytes = fs::read(&a.path).map_err(|e| usage(format!("{}: {e}", a.path.display())))?;
    let model = decode_model(&bytes).map_err(|e| usage(format!("{}: {e}", a.path.display())))?;
    let info = ModelInfo {
        name: model.name(),
        class_labels: model.class_labels(),
        input: crate::nn::INPUT_SHAPE,
        layers: model.layer_reports(),
        total_params: model.param_count(),
        total_flops: model.flops_total(),
        blob_floats: blob_float_count(&bytes).map_err(usage)?,
        last_layer_complexity_percent: model.last_layer_complexity(),
    };
    if a.format == "json" {
        let json = serde_json::to_string_pretty(&info).expect("info serialises");
        return writeln!(out, "{json}").map_err(runtime);
    }
    let mut text = String::new();
    let norm = model.normalization();
    text += &format!("model        {}\n", info.name);
    text += &format!("labels       {}\n", info.class_labels.join(", "));
    text += &format!("normalise    mean {:?} std {:?}\n", norm.mean, norm.std);
    text += &format!("input        {}\n\n", info.input);
    let rows: Vec<[String; 5]> = info
        .layers
        .iter()
        .map(|r| {
            [
                format!("{}{}", "  ".repeat(r.depth), r.description),
                r.input.to_string(),
                r.output.to_string(),
                group_thousands(r.params),
                group_thousands(r.flops),
            ]
        })
        .collect();
    let header = ["layer", "input", "output", "params", "flops"].map(String::from);
    let mut widths = [0usize; 5];
    for row in std::iter::once(&header).chain(&rows) {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    for row in std::iter::once(&header).chain(&rows) {
        text += &format!(
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}  {:>w4$}\n",
            row[0],
            row[1],
            row[2],
            row[3],
            row[4],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3],
            w4 = widths[4]
        );
    }
    text += &format!("\ntotal params           {}\n", group_thousands(info.total_params));
    text += &format!("total flops            {}\n", group_thousands(info.total_flops));
    text += &format!("weight blob floats     {}\n", group_thousands(info.blob_floats as u64));
    text += &format!("last layer complexity  {:.4}%\n", info.last_layer_complexity_percent);
    out.write_all(text.as_bytes()).map_err(runtime)
}

/// Run a parsed command, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match &cli.command {
        Command::Monitor(a) => cmd_monitor(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Dataset(a) => cmd_dataset(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::ModelInfo(a) => cmd_model_info(a, out),
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .try_init();
}

/// Parse `args`, run, and return the process exit code. Help and version
/// text go to `out`; errors go to stderr.
pub fn execute<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = e.print();
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return e.exit_code();
        }
    };
    init_logging(&cli);
    match run(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("vinevi: {}", f.message());
            f.exit_code()
        }
    }
}
