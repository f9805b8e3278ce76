//! Acceptance criteria, run serially so timing checks have the machine to
//! themselves. One PASS/FAIL line per criterion; exits non-zero on any FAIL.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vinevi::bench::{compare_models, measure_cpu, measure_latency, BenchOptions, LatencyStats, Predictor};
use vinevi::classify::classify_heuristic;
use vinevi::metrics::TRAFFIC_PACKETS;
use vinevi::nn::{
    blob_float_count, encode_model, load_model, run_layers, zoo, Conv2d, Dense, DepthwiseConv2d, Layer, Model,
    Normalization,
};
use vinevi::pcap::synth::{self, CLASS_PORTS};
use vinevi::pcap::{read_pcap, write_pcap, ByteOrder, PcapMeta, RawPacket, TsResolution, LINKTYPE_ETHERNET};
use vinevi::pipeline::{run, ClassifierConfig, PipelineConfig, Sampler, SamplingPolicy, SourceConfig};
use vinevi::tensor::{Shape, Tensor3};
use vinevi::vision::{packet_to_image, TransformConfig, IMAGE_SIDE};
use vinevi::{ModelClassifier, PacketImage, TrafficClass};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn pcap_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    for (order, res) in [
        (ByteOrder::Little, TsResolution::Micros),
        (ByteOrder::Big, TsResolution::Micros),
        (ByteOrder::Little, TsResolution::Nanos),
    ] {
        let max_frac = if res == TsResolution::Nanos {
            999_999_999
        } else {
            999_999
        };
        let packets: Vec<RawPacket> = synth::mixed_frames(2000)
            .into_iter()
            .enumerate()
            .map(|(i, (_, data))| RawPacket {
                ts_sec: 1_700_000_000 + i as u32,
                ts_frac: (i as u32 * 7919) % max_frac,
                ts_resolution: res,
                captured_len: data.len() as u32,
                original_len: data.len() as u32 + (i % 3) as u32,
                data,
            })
            .collect();
        let meta = PcapMeta::new(order, res, 65535, LINKTYPE_ETHERNET);
        let bytes = write_pcap(meta, &packets).map_err(|e| e.to_string())?;
        let (back_meta, back) = read_pcap(&bytes).map_err(|e| e.to_string())?;
        ensure!(back_meta == meta, "{order:?}/{res:?}: header changed");
        ensure!(back == packets, "{order:?}/{res:?}: packets changed");
        ensure!(
            write_pcap(back_meta, &back).unwrap() == bytes,
            "{order:?}/{res:?}: bytes changed"
        );
        total += back.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("{total} packets over 3 files in {elapsed:.1?}"))
}

fn transform_oracle() -> Outcome {
    let cfg = TransformConfig::default();
    let quad = [0u8, 64, 128, 255];
    for _ in 0..2 {
        let img = packet_to_image(&quad, &cfg).map_err(|e| e.to_string())?;
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                let want = quad[(y / 112) * 2 + x / 112];
                for c in 0..3 {
                    ensure!(img.pixel(y, x, c) == want, "quadrant pixel ({y},{x},{c})");
                }
            }
        }
    }
    let full: Vec<u8> = (0..IMAGE_SIDE * IMAGE_SIDE).map(|i| (i * 31 % 251) as u8).collect();
    let a = packet_to_image(&full, &cfg).map_err(|e| e.to_string())?;
    let b = packet_to_image(&full, &cfg).map_err(|e| e.to_string())?;
    ensure!(a.as_bytes() == b.as_bytes(), "not deterministic");
    for (i, v) in full.iter().enumerate() {
        ensure!(a.pixel(i / IMAGE_SIDE, i % IMAGE_SIDE, 0) == *v, "identity pixel {i}");
    }
    Ok("4-byte quadrants and 224x224 identity bit-exact".into())
}

/// Straightforward evaluator: every output element is its own loop.
fn reference(layers: &[Layer], shape: Shape, x: &[f64]) -> (Shape, Vec<f64>) {
    let mut shape = shape;
    let mut x = x.to_vec();
    let at = |x: &[f64], s: Shape, c: usize, y: isize, w: isize| -> f64 {
        if y < 0 || w < 0 || y >= s.h as isize || w >= s.w as isize {
            0.0
        } else {
            x[(c * s.h + y as usize) * s.w + w as usize]
        }
    };
    for layer in layers {
        let (out_shape, out): (Shape, Vec<f64>) = match layer {
            Layer::Conv2d(cv) => {
                let oh = (shape.h + 2 * cv.padding - cv.kernel_h) / cv.stride + 1;
                let ow = (shape.w + 2 * cv.padding - cv.kernel_w) / cv.stride + 1;
                let s = Shape::new(cv.out_channels, oh, ow);
                let mut out = Vec::new();
                for o in 0..cv.out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = cv.bias.as_ref().map_or(0.0, |b| b[o] as f64);
                            for i in 0..cv.in_channels {
                                for ky in 0..cv.kernel_h {
                                    for kx in 0..cv.kernel_w {
                                        let w = cv.weights
                                            [((o * cv.in_channels + i) * cv.kernel_h + ky) * cv.kernel_w + kx];
                                        let y = (oy * cv.stride + ky) as isize - cv.padding as isize;
                                        let xx = (ox * cv.stride + kx) as isize - cv.padding as isize;
                                        acc += w as f64 * at(&x, shape, i, y, xx);
                                    }
                                }
                            }
                            out.push(acc);
                        }
                    }
                }
                (s, out)
            }
            Layer::DepthwiseConv2d(d) => {
                let oh = (shape.h + 2 * d.padding - d.kernel_h) / d.stride + 1;
                let ow = (shape.w + 2 * d.padding - d.kernel_w) / d.stride + 1;
                let mut out = Vec::new();
                for c in 0..d.channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = d.bias.as_ref().map_or(0.0, |b| b[c] as f64);
                            for ky in 0..d.kernel_h {
                                for kx in 0..d.kernel_w {
                                    let w = d.weights[(c * d.kernel_h + ky) * d.kernel_w + kx];
                                    let y = (oy * d.stride + ky) as isize - d.padding as isize;
                                    let xx = (ox * d.stride + kx) as isize - d.padding as isize;
                                    acc += w as f64 * at(&x, shape, c, y, xx);
                                }
                            }
                            out.push(acc);
                        }
                    }
                }
                (Shape::new(d.channels, oh, ow), out)
            }
            Layer::Relu => (shape, x.iter().map(|v| v.max(0.0)).collect()),
            Layer::MaxPool2d { kernel, stride } => {
                let oh = (shape.h - kernel) / stride + 1;
                let ow = (shape.w - kernel) / stride + 1;
                let mut out = Vec::new();
                for c in 0..shape.c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut m = f64::NEG_INFINITY;
                            for ky in 0..*kernel {
                                for kx in 0..*kernel {
                                    m = m.max(at(
                                        &x,
                                        shape,
                                        c,
                                        (oy * stride + ky) as isize,
                                        (ox * stride + kx) as isize,
                                    ));
                                }
                            }
                            out.push(m);
                        }
                    }
                }
                (Shape::new(shape.c, oh, ow), out)
            }
            Layer::GlobalAvgPool => {
                let plane = shape.h * shape.w;
                let out = (0..shape.c)
                    .map(|c| x[c * plane..(c + 1) * plane].iter().sum::<f64>() / plane as f64)
                    .collect();
                (Shape::new(shape.c, 1, 1), out)
            }
            Layer::Dense(d) => {
                let out = (0..d.out_features)
                    .map(|o| {
                        let b = d.bias.as_ref().map_or(0.0, |b| b[o] as f64);
                        b + (0..d.in_features)
                            .map(|i| d.weights[o * d.in_features + i] as f64 * x[i])
                            .sum::<f64>()
                    })
                    .collect();
                (Shape::new(d.out_features, 1, 1), out)
            }
            Layer::Softmax => {
                let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
                let z: f64 = e.iter().sum();
                (shape, e.iter().map(|v| v / z).collect())
            }
            Layer::ResidualBlock(inner) => {
                let (s, y) = reference(inner, shape, &x);
                (s, y.iter().zip(&x).map(|(a, b)| a + b).collect())
            }
        };
        shape = out_shape;
        x = out;
    }
    (shape, x)
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

fn bias(rng: &mut ChaCha8Rng, n: usize) -> Option<Vec<f32>> {
    rng.gen_bool(0.7).then(|| weights(rng, n))
}

/// A random stack that fits `shape`, ending in dense and softmax.
fn random_layers(rng: &mut ChaCha8Rng, mut shape: Shape) -> Vec<Layer> {
    let mut layers = Vec::new();
    for _ in 0..rng.gen_range(1..5) {
        let layer = match rng.gen_range(0..6) {
            0 => {
                let k = rng.gen_range(1..=3.min(shape.h).min(shape.w));
                let out_channels = rng.gen_range(1..5);
                Layer::Conv2d(Conv2d {
                    kernel_h: k,
                    kernel_w: k,
                    stride: rng.gen_range(1..3),
                    padding: rng.gen_range(0..2),
                    in_channels: shape.c,
                    out_channels,
                    weights: weights(rng, out_channels * shape.c * k * k),
                    bias: bias(rng, out_channels),
                })
            }
            1 => {
                let k = rng.gen_range(1..=3.min(shape.h).min(shape.w));
                Layer::DepthwiseConv2d(DepthwiseConv2d {
                    kernel_h: k,
                    kernel_w: k,
                    stride: rng.gen_range(1..3),
                    padding: rng.gen_range(0..2),
                    channels: shape.c,
                    weights: weights(rng, shape.c * k * k),
                    bias: bias(rng, shape.c),
                })
            }
            2 => Layer::Relu,
            3 if shape.h >= 2 && shape.w >= 2 => Layer::MaxPool2d {
                kernel: 2,
                stride: rng.gen_range(1..3),
            },
            4 => Layer::ResidualBlock(vec![
                Layer::Conv2d(Conv2d {
                    kernel_h: 3,
                    kernel_w: 3,
                    stride: 1,
                    padding: 1,
                    in_channels: shape.c,
                    out_channels: shape.c,
                    weights: weights(rng, shape.c * shape.c * 9),
                    bias: bias(rng, shape.c),
                }),
                Layer::Relu,
            ]),
            _ => Layer::Relu,
        };
        shape = layer.output_shape(shape).unwrap();
        layers.push(layer);
    }
    if rng.gen_bool(0.5) {
        layers.push(Layer::GlobalAvgPool);
        shape = Shape::new(shape.c, 1, 1);
    }
    let out = rng.gen_range(2..8);
    layers.push(Layer::Dense(Dense {
        in_features: shape.len(),
        out_features: out,
        weights: weights(rng, out * shape.len()),
        bias: bias(rng, out),
    }));
    if rng.gen_bool(0.5) {
        layers.push(Layer::Softmax);
    }
    layers
}

fn forward_matches_reference() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let configs = 200;
    let mut worst = 0.0f64;
    for n in 0..configs {
        let shape = Shape::new(rng.gen_range(1..4), rng.gen_range(1..=8), rng.gen_range(1..=8));
        let layers = random_layers(&mut rng, shape);
        let input: Vec<f64> = (0..shape.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got =
            run_layers(&layers, Tensor3::from_vec(shape, input.clone())).map_err(|e| format!("config {n}: {e}"))?;
        let (want_shape, want) = reference(&layers, shape, &input);
        ensure!(
            got.shape() == want_shape,
            "config {n}: shape {} vs {want_shape}",
            got.shape()
        );
        for (a, b) in got.data().iter().zip(&want) {
            let rel = (a - b).abs() / b.abs().max(1e-3);
            worst = worst.max(rel);
            ensure!(rel < 1e-6, "config {n}: {a} vs {b}");
        }
    }
    for name in zoo::NAMES {
        let model = Arc::new(load_model(zoo::fixture_path(name)).map_err(|e| e.to_string())?);
        let classifier = ModelClassifier::new(model, TransformConfig::default()).map_err(|e| e.to_string())?;
        let img = packet_to_image(
            &synth::class_frame(synth::Transport::Tcp, 22, 1, 80),
            &TransformConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        let s: f64 = classifier
            .scores(&img)
            .map_err(|e| e.to_string())?
            .as_slice()
            .iter()
            .sum();
        ensure!((s - 1.0).abs() < 1e-9, "{name}: softmax sums to {s}");
    }
    Ok(format!(
        "{configs} random configs, worst relative error {worst:.1e}; fixture softmax sums within 1e-9"
    ))
}

fn accounting() -> Outcome {
    for name in zoo::NAMES {
        let model = zoo::build(name).unwrap();
        let floats = blob_float_count(&encode_model(&model)).map_err(|e| e.to_string())?;
        ensure!(
            model.param_count() as usize == floats,
            "{name}: params {} vs blob {floats}",
            model.param_count()
        );
    }
    let dense = Layer::Dense(Dense {
        in_features: 512,
        out_features: 7,
        weights: vec![0.0; 512 * 7],
        bias: None,
    });
    let flops = dense.flops(Shape::new(512, 1, 1)).map_err(|e| e.to_string())?;
    ensure!(flops == 7168, "dense 512->7 has {flops} flops");

    let labels: Vec<String> = TrafficClass::ALL.iter().map(|c| c.to_string()).collect();
    let conv = Layer::Conv2d(Conv2d {
        kernel_h: 3,
        kernel_w: 3,
        stride: 8,
        padding: 0,
        in_channels: 3,
        out_channels: 512,
        weights: vec![0.0; 512 * 27],
        bias: None,
    });
    let model = Model::new(
        "conv-dense",
        labels,
        Normalization::default(),
        vec![conv, Layer::GlobalAvgPool, dense, Layer::Softmax],
    )
    .map_err(|e| e.to_string())?;
    let total = model.flops_total();
    let want = 100.0 * 7168.0 / 21_683_200.0;
    let got = model.last_layer_complexity();
    ensure!(
        (got - want).abs() < 1e-9,
        "complexity {got} vs {want} (total flops {total})"
    );
    Ok(format!(
        "params equal blob floats; dense 7168 flops; complexity {got:.6}%"
    ))
}

fn conservation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = common::write_mixed_pcap(dir.path(), "mix.pcap", 1000);
    let start = Instant::now();
    let summary = run(PipelineConfig::new(
        SourceConfig::Pcap { path, pace: false },
        ClassifierConfig::Heuristic,
    ))
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(summary.packets_seen == 1000, "seen {}", summary.packets_seen);
    ensure!(summary.recorded() == 1000, "recorded {}", summary.recorded());
    let samples = common::parse_exposition(&summary.final_exposition)?;
    let exposed: f64 = samples
        .iter()
        .filter(|s| s.name == TRAFFIC_PACKETS)
        .map(|s| s.value)
        .sum();
    ensure!(exposed == 1000.0, "exposition sums to {exposed}");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "1000 in, 1000 recorded, exposition sums to 1000, {elapsed:.1?}"
    ))
}

fn heuristic_coverage() -> Outcome {
    let mut agree = 0;
    for (i, (class, transport, port)) in CLASS_PORTS.iter().enumerate() {
        let frame = synth::class_frame(*transport, *port, i as u32, 40);
        let pkt = synth::stamp(vec![frame], Duration::ZERO, Duration::ZERO).remove(0);
        let r = classify_heuristic(&pkt, LINKTYPE_ETHERNET);
        ensure!(r.class == *class, "{transport:?}/{port}: got {} want {class}", r.class);
        agree += 1;
    }
    Ok(format!("{agree}/{} classes agree", TrafficClass::COUNT))
}

fn sampling_policies() -> Outcome {
    let mut one_in_three = Sampler::new(SamplingPolicy::OneInN(3));
    let taken = (0..30)
        .filter(|&i| one_in_three.should_sample(i, Duration::ZERO))
        .count();
    ensure!(taken == 10, "1/3 took {taken} of 30");

    // 10 packets per second of capture time for 5 seconds
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = common::write_port_pcap(
        dir.path(),
        "paced.pcap",
        synth::Transport::Udp,
        53,
        50,
        Duration::from_millis(100),
    );
    let policy = SamplingPolicy::TimePool {
        period: Duration::from_secs(1),
        budget: 2,
    };
    let mut sampler = Sampler::new(policy);
    let (_, packets) = read_pcap(&std::fs::read(&path).unwrap()).map_err(|e| e.to_string())?;
    let mut per_second = std::collections::BTreeMap::new();
    for (i, p) in packets.iter().enumerate() {
        if sampler.should_sample(i as u64, p.timestamp()) {
            *per_second.entry(p.ts_sec).or_insert(0) += 1;
        }
    }
    ensure!(
        per_second.len() == 5 && per_second.values().all(|&n| n == 2),
        "pool: {per_second:?}"
    );

    let mut cfg = PipelineConfig::new(SourceConfig::Pcap { path, pace: false }, ClassifierConfig::Heuristic);
    cfg.sampling = policy;
    let summary = run(cfg).map_err(|e| e.to_string())?;
    ensure!(
        summary.packets_sampled == 10,
        "pipeline sampled {}",
        summary.packets_sampled
    );
    Ok("1/3 takes 10 of 30; pool(1s,2) takes 2 in each of 5 seconds".into())
}

struct Stub {
    name: &'static str,
    work: fn(),
}

impl Predictor for Stub {
    fn name(&self) -> &str {
        self.name
    }

    fn predict(&self, _: &PacketImage) -> usize {
        (self.work)();
        0
    }
}

fn latency_stats() -> Outcome {
    let stats = LatencyStats::from_samples("closed-form", &[10.0, 20.0]).map_err(|e| e.to_string())?;
    let std = 50f64.sqrt();
    ensure!((stats.mean_ms - 15.0).abs() < 1e-9, "mean {}", stats.mean_ms);
    ensure!((stats.std_ms - std).abs() < 1e-9, "std {}", stats.std_ms);
    ensure!(
        (stats.ci95_half_width_ms - 1.96 * std / 2f64.sqrt()).abs() < 1e-9,
        "ci {}",
        stats.ci95_half_width_ms
    );

    let sleeper = Stub {
        name: "sleep-10ms",
        work: || std::thread::sleep(Duration::from_millis(10)),
    };
    let m = measure_latency(&sleeper, &[PacketImage::filled(0)], 50, 0).map_err(|e| e.to_string())?;
    ensure!(m.stats.n == 50, "n {}", m.stats.n);
    ensure!(
        (10.0..=13.0).contains(&m.stats.mean_ms),
        "sleep stub mean {} ms",
        m.stats.mean_ms
    );
    Ok(format!(
        "closed form exact; sleep stub mean {:.3} ms over 50",
        m.stats.mean_ms
    ))
}

fn cpu_usage() -> Outcome {
    let busy = Stub {
        name: "busy",
        work: || {
            let t = Instant::now();
            while t.elapsed() < Duration::from_millis(5) {
                std::hint::spin_loop();
            }
        },
    };
    let idle = Stub {
        name: "idle",
        work: || std::thread::sleep(Duration::from_millis(20)),
    };
    let img = [PacketImage::filled(0)];
    let period = Duration::from_millis(200);
    let b = measure_cpu(&busy, &img, Duration::from_secs(2), period).map_err(|e| e.to_string())?;
    let i = measure_cpu(&idle, &img, Duration::from_secs(2), period).map_err(|e| e.to_string())?;
    ensure!(b.mean_cpu_percent >= 90.0, "busy stub {:.1}%", b.mean_cpu_percent);
    ensure!(i.mean_cpu_percent <= 10.0, "sleep stub {:.1}%", i.mean_cpu_percent);
    Ok(format!(
        "busy {:.1}%, sleeping {:.1}%",
        b.mean_cpu_percent, i.mean_cpu_percent
    ))
}

fn model_comparison() -> Outcome {
    let start = Instant::now();
    let paths: Vec<PathBuf> = zoo::NAMES.iter().map(|n| zoo::fixture_path(n)).collect();
    let packets: Vec<Vec<u8>> = synth::mixed_frames(7).into_iter().map(|(_, f)| f).collect();
    let opts = BenchOptions {
        iterations: 10,
        warmup: 2,
        ..BenchOptions::default()
    };
    let report = compare_models(&paths, &packets, &opts).map_err(|e| e.to_string())?;
    ensure!(report.errors.is_empty(), "errors: {:?}", report.errors);
    ensure!(report.rows.len() == 3, "{} rows", report.rows.len());
    for row in &report.rows {
        for v in [
            row.latency.mean_ms,
            row.latency.min_ms,
            row.latency_with_transform.mean_ms,
        ] {
            ensure!(v.is_finite() && v > 0.0, "{}: latency {v}", row.model);
        }
        ensure!(
            row.params > 0 && row.flops > 0,
            "{}: params {} flops {}",
            row.model,
            row.params,
            row.flops
        );
    }
    let means: Vec<f64> = report.rows.iter().map(|r| r.latency.mean_ms).collect();
    ensure!(means.windows(2).all(|w| w[0] <= w[1]), "rows not sorted by latency");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "3 rows, fastest {} at {:.2} ms, {elapsed:.1?}",
        report.rows[0].model, means[0]
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("pcap round-trip", pcap_roundtrip),
        ("packet-to-image transform", transform_oracle),
        ("forward pass vs reference", forward_matches_reference),
        ("parameter and FLOP accounting", accounting),
        ("per-class conservation", conservation),
        ("heuristic class coverage", heuristic_coverage),
        ("sampling policies", sampling_policies),
        ("latency statistics", latency_stats),
        ("CPU utilisation", cpu_usage),
        ("model comparison", model_comparison),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
