//! Prediction latency and CPU measurement, and the per-model comparison
//! report built from them.
//!
//! Latency runs `warmup` untimed predictions, then `iterations` timed ones
//! with a monotonic clock, cycling through the input images. Statistics use
//! the sample standard deviation and a normal-approximation 95% interval,
//! `1.96 * std / sqrt(n)`.
//!
//! CPU is the process's own CPU time (user + system, from procfs) over wall
//! time, per sampling period, so one saturated core reads as 100%.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::ModelClassifier;
use crate::metrics::host::{process_cpu_time, HostError};
use crate::nn::load_model;
use crate::vision::{packet_to_image, PacketImage, TransformConfig};

/// Report values are rounded once, so the table and JSON show the same
/// numbers. Raw timings in the CSV are not rounded.
const MS_DECIMALS: i32 = 4;
const PERCENT_DECIMALS: i32 = 6;

pub const DEFAULT_WARMUP: usize = 10;
pub const DEFAULT_ITERATIONS: usize = 50;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("need at least 2 timed iterations, got {0}")]
    TooFewIterations(usize),
    #[error("no input images")]
    NoInputs,
    #[error("duration {duration:?} must be at least twice the sample period {period:?}")]
    DurationTooShort { duration: Duration, period: Duration },
    #[error(transparent)]
    Host(#[from] HostError),
}

/// Something that classifies one image. Implemented by the model classifier
/// and by test stubs.
pub trait Predictor: Sync {
    fn name(&self) -> &str;

    /// Index of the predicted class.
    fn predict(&self, img: &PacketImage) -> usize;
}

impl Predictor for ModelClassifier {
    fn name(&self) -> &str {
        self.model().name()
    }

    fn predict(&self, img: &PacketImage) -> usize {
        self.scores(img).ok().and_then(|s| s.argmax()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub model: String,
    pub n: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub ci95_half_width_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(model: impl Into<String>, samples_ms: &[f64]) -> Result<Self, BenchError> {
        let n = samples_ms.len();
        if n < 2 {
            return Err(BenchError::TooFewIterations(n));
        }
        let mean = samples_ms.iter().sum::<f64>() / n as f64;
        let var = samples_ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        Ok(LatencyStats {
            model: model.into(),
            n,
            mean_ms: mean,
            std_ms: std,
            min_ms: samples_ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ci95_half_width_ms: 1.96 * std / (n as f64).sqrt(),
        })
    }
}

/// Round to `decimals` places, for report display.
pub fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

impl LatencyStats {
    /// Every millisecond field rounded to `decimals` places.
    pub fn rounded(&self, decimals: i32) -> Self {
        LatencyStats {
            model: self.model.clone(),
            n: self.n,
            mean_ms: round_to(self.mean_ms, decimals),
            std_ms: round_to(self.std_ms, decimals),
            min_ms: round_to(self.min_ms, decimals),
            max_ms: round_to(self.max_ms, decimals),
            ci95_half_width_ms: round_to(self.ci95_half_width_ms, decimals),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LatencyMeasurement {
    pub stats: LatencyStats,
    pub timings_ms: Vec<f64>,
}

/// Time `f` over `items`.
pub fn measure<T>(
    name: &str,
    items: &[T],
    iterations: usize,
    warmup: usize,
    mut f: impl FnMut(&T),
) -> Result<LatencyMeasurement, BenchError> {
    if iterations < 2 {
        return Err(BenchError::TooFewIterations(iterations));
    }
    if items.is_empty() {
        return Err(BenchError::NoInputs);
    }
    for i in 0..warmup {
        f(&items[i % items.len()]);
    }
    let mut timings_ms = Vec::with_capacity(iterations);
    for i in 0..iterations {
        let item = &items[i % items.len()];
        let start = Instant::now();
        f(item);
        timings_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(LatencyMeasurement {
        stats: LatencyStats::from_samples(name, &timings_ms)?,
        timings_ms,
    })
}

pub fn measure_latency(
    predictor: &dyn Predictor,
    images: &[PacketImage],
    iterations: usize,
    warmup: usize,
) -> Result<LatencyMeasurement, BenchError> {
    measure(predictor.name(), images, iterations, warmup, |img| {
        std::hint::black_box(predictor.predict(img));
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpuSample {
    /// Seconds since the measurement started, at the end of the period.
    pub t_s: f64,
    pub cpu_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuReport {
    pub model: String,
    pub duration_s: f64,
    pub mean_cpu_percent: f64,
    pub samples: Vec<CpuSample>,
}

/// Run predictions in a loop on a second thread for `duration`, sampling
/// this process's CPU share every `sample_period`.
pub fn measure_cpu(
    predictor: &dyn Predictor,
    images: &[PacketImage],
    duration: Duration,
    sample_period: Duration,
) -> Result<CpuReport, BenchError> {
    if sample_period.is_zero() || duration < sample_period * 2 {
        return Err(BenchError::DurationTooShort {
            duration,
            period: sample_period,
        });
    }
    if images.is_empty() {
        return Err(BenchError::NoInputs);
    }
    process_cpu_time()?;
    let stop = Arc::new(AtomicBool::new(false));
    let samples = std::thread::scope(|scope| {
        let stop_worker = stop.clone();
        scope.spawn(move || {
            let mut i = 0;
            while !stop_worker.load(Ordering::Relaxed) {
                std::hint::black_box(predictor.predict(&images[i % images.len()]));
                i += 1;
            }
        });
        let result = sample_cpu(duration, sample_period);
        stop.store(true, Ordering::Relaxed);
        result
    })?;
    let mean = samples.iter().map(|s| s.cpu_percent).sum::<f64>() / samples.len() as f64;
    Ok(CpuReport {
        model: predictor.name().to_owned(),
        duration_s: duration.as_secs_f64(),
        mean_cpu_percent: mean,
        samples,
    })
}

fn sample_cpu(duration: Duration, period: Duration) -> Result<Vec<CpuSample>, BenchError> {
    let start = Instant::now();
    let mut last_wall = start;
    let mut last_cpu = process_cpu_time()?;
    let mut samples = Vec::new();
    let mut next = start + period;
    while next <= start + duration {
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        }
        let wall = Instant::now();
        let cpu = process_cpu_time()?;
        let dw = (wall - last_wall).as_secs_f64();
        let dc = cpu.saturating_sub(last_cpu).as_secs_f64();
        samples.push(CpuSample {
            t_s: (wall - start).as_secs_f64(),
            cpu_percent: if dw > 0.0 {
                (100.0 * dc / dw).clamp(0.0, 100.0)
            } else {
                0.0
            },
        });
        last_wall = wall;
        last_cpu = cpu;
        next += period;
    }
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub iterations: usize,
    pub warmup: usize,
    /// Also measure CPU for this long per model.
    pub cpu_duration: Option<Duration>,
    pub cpu_sample_period: Duration,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            iterations: DEFAULT_ITERATIONS,
            warmup: DEFAULT_WARMUP,
            cpu_duration: None,
            cpu_sample_period: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub path: PathBuf,
    pub params: u64,
    pub flops: u64,
    pub last_layer_complexity_percent: f64,
    /// Image in, class out: normalisation and forward pass.
    pub latency: LatencyStats,
    /// Packet bytes in, class out: adds the packet-to-image transform.
    pub latency_with_transform: LatencyStats,
    pub cpu: Option<CpuReport>,
    #[serde(skip)]
    pub timings_ms: Vec<f64>,
    #[serde(skip)]
    pub timings_with_transform_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub path: PathBuf,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub warmup: usize,
    pub inputs: usize,
    /// Sorted by `latency.mean_ms`, fastest first.
    pub rows: Vec<ModelRow>,
    pub errors: Vec<RowError>,
}

fn bench_one(
    path: &Path,
    packets: &[Vec<u8>],
    images: &[PacketImage],
    opts: &BenchOptions,
) -> Result<ModelRow, String> {
    let model = Arc::new(load_model(path).map_err(|e| e.to_string())?);
    let transform = TransformConfig::default();
    let classifier = ModelClassifier::new(model.clone(), transform).map_err(|e| e.to_string())?;
    let exclusive = measure_latency(&classifier, images, opts.iterations, opts.warmup).map_err(|e| e.to_string())?;
    let inclusive = measure(model.name(), packets, opts.iterations, opts.warmup, |bytes| {
        if let Ok(img) = packet_to_image(bytes, &transform) {
            std::hint::black_box(classifier.predict(&img));
        }
    })
    .map_err(|e| e.to_string())?;
    let cpu = match opts.cpu_duration {
        Some(d) => Some(measure_cpu(&classifier, images, d, opts.cpu_sample_period).map_err(|e| e.to_string())?),
        None => None,
    };
    Ok(ModelRow {
        model: model.name().to_owned(),
        path: path.to_owned(),
        params: model.param_count(),
        flops: model.flops_total(),
        last_layer_complexity_percent: round_to(model.last_layer_complexity(), PERCENT_DECIMALS),
        latency: exclusive.stats.rounded(MS_DECIMALS),
        latency_with_transform: inclusive.stats.rounded(MS_DECIMALS),
        cpu: cpu.map(|mut c| {
            c.mean_cpu_percent = round_to(c.mean_cpu_percent, 2);
            c
        }),
        timings_ms: exclusive.timings_ms,
        timings_with_transform_ms: inclusive.timings_ms,
    })
}

/// Benchmark each model on the same packets. Load or measurement failures
/// become entries in `errors`; the other models still run.
pub fn compare_models(paths: &[PathBuf], packets: &[Vec<u8>], opts: &BenchOptions) -> Result<BenchReport, BenchError> {
    let packets: Vec<Vec<u8>> = packets.iter().filter(|p| !p.is_empty()).cloned().collect();
    if packets.is_empty() {
        return Err(BenchError::NoInputs);
    }
    if opts.iterations < 2 {
        return Err(BenchError::TooFewIterations(opts.iterations));
    }
    let transform = TransformConfig::default();
    let images: Vec<PacketImage> = packets
        .iter()
        .map(|p| packet_to_image(p, &transform).expect("non-empty packet"))
        .collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for path in paths {
        match bench_one(path, &packets, &images, opts) {
            Ok(row) => rows.push(row),
            Err(error) => {
                log::warn!("{}: {error}", path.display());
                errors.push(RowError {
                    path: path.clone(),
                    error,
                })
            }
        }
    }
    rows.sort_by(|a, b| a.latency.mean_ms.total_cmp(&b.latency.mean_ms));
    Ok(BenchReport {
        iterations: opts.iterations,
        warmup: opts.warmup,
        inputs: packets.len(),
        rows,
        errors,
    })
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Aligned text table with the same numbers as [`BenchReport::to_json`].
    pub fn to_table(&self) -> String {
        let header = [
            "model",
            "params",
            "flops",
            "last_layer_%",
            "mean_ms",
            "std_ms",
            "ci95_ms",
            "min_ms",
            "max_ms",
            "mean_with_transform_ms",
            "cpu_%",
        ];
        let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            cells.push(vec![
                r.model.clone(),
                r.params.to_string(),
                r.flops.to_string(),
                r.last_layer_complexity_percent.to_string(),
                r.latency.mean_ms.to_string(),
                r.latency.std_ms.to_string(),
                r.latency.ci95_half_width_ms.to_string(),
                r.latency.min_ms.to_string(),
                r.latency.max_ms.to_string(),
                r.latency_with_transform.mean_ms.to_string(),
                r.cpu.as_ref().map_or("-".into(), |c| c.mean_cpu_percent.to_string()),
            ]);
        }
        let widths: Vec<usize> = (0..header.len())
            .map(|i| cells.iter().map(|row| row[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        for e in &self.errors {
            let _ = writeln!(out, "error: {}: {}", e.path.display(), e.error);
        }
        out
    }

    /// `model,variant,iteration,ms` for every timed prediction.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("model,variant,iteration,ms\n");
        for r in &self.rows {
            for (variant, timings) in [("image", &r.timings_ms), ("packet", &r.timings_with_transform_ms)] {
                for (i, t) in timings.iter().enumerate() {
                    let _ = writeln!(out, "{},{variant},{i},{t}", r.model);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_two_samples() {
        let s = LatencyStats::from_samples("m", &[10.0, 20.0]).unwrap();
        assert_eq!(s.mean_ms, 15.0);
        let std = 50f64.sqrt();
        assert!(((s.std_ms - std) / std).abs() < 1e-12);
        assert!((s.std_ms - 7.071).abs() < 1e-3);
        let ci = 1.96 * std / 2f64.sqrt();
        assert!(((s.ci95_half_width_ms - ci) / ci).abs() < 1e-12);
        assert!((s.ci95_half_width_ms - 9.80).abs() < 1e-9);
        assert_eq!((s.min_ms, s.max_ms), (10.0, 20.0));
    }

    #[test]
    fn too_few_iterations() {
        assert!(matches!(
            LatencyStats::from_samples("m", &[1.0]),
            Err(BenchError::TooFewIterations(1))
        ));
        assert!(matches!(
            measure("m", &[()], 1, 0, |_| {}),
            Err(BenchError::TooFewIterations(1))
        ));
    }

    #[test]
    fn warmup_and_cycling() {
        let mut seen = Vec::new();
        let m = measure("m", &[1, 2, 3], 4, 2, |x| seen.push(*x)).unwrap();
        assert_eq!(seen, vec![1, 2, 1, 2, 3, 1]);
        assert_eq!(m.timings_ms.len(), 4);
        assert!(m.stats.min_ms <= m.stats.mean_ms && m.stats.mean_ms <= m.stats.max_ms);
    }

    #[test]
    fn cpu_duration_precondition() {
        struct Idle;
        impl Predictor for Idle {
            fn name(&self) -> &str {
                "idle"
            }
            fn predict(&self, _: &PacketImage) -> usize {
                0
            }
        }
        let err = measure_cpu(
            &Idle,
            &[PacketImage::filled(0)],
            Duration::from_millis(300),
            Duration::from_millis(200),
        )
        .unwrap_err();
        assert!(matches!(err, BenchError::DurationTooShort { .. }));
    }
}
