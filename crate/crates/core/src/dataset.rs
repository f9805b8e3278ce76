//! Labelled image datasets from pcaps.
//!
//! Each sampled packet becomes `<out>/<split>/<class>/<stem>_<index>.<ext>`,
//! where `index` is the packet's position in its pcap. Splits are drawn from
//! a ChaCha stream seeded by the caller, one draw per emitted image in input
//! order, so the same inputs and seed give a byte-identical tree.
//! `manifest.json` records inputs, counts and per-file errors.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::TrafficClass;
use crate::pcap::{FileSource, PacketSource};
use crate::pipeline::{Sampler, SamplingPolicy};
use crate::vision::{packet_to_image, write_image, ImageFormat, TransformConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid split {0:?}: expected three non-negative ratios summing to 1, like 0.8/0.1/0.1")]
    BadSplit(String),
    #[error("invalid entry {0:?}: expected <class>=<pcap path>")]
    BadEntry(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("no input pcaps")]
    NoEntries,
    #[error("{0}")]
    Sampling(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Train/val/test ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self, DatasetError> {
        let s = SplitRatios { train, val, test };
        let ok =
            [train, val, test].iter().all(|r| r.is_finite() && *r >= 0.0) && (train + val + test - 1.0).abs() < 1e-9;
        if ok {
            Ok(s)
        } else {
            Err(DatasetError::BadSplit(s.to_string()))
        }
    }

    /// Split name for a uniform draw in `[0, 1)`.
    pub fn pick(&self, u: f64) -> &'static str {
        if u < self.train {
            SPLITS[0]
        } else if u < self.train + self.val {
            SPLITS[1]
        } else if self.test > 0.0 {
            SPLITS[2]
        } else if self.val > 0.0 {
            // rounding left a sliver past train + val
            SPLITS[1]
        } else {
            SPLITS[0]
        }
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatios {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::BadSplit(s.to_owned());
        let parts: Vec<f64> = s
            .split('/')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [train, val, test] = parts[..] else {
            return Err(bad());
        };
        SplitRatios::new(train, val, test).map_err(|_| bad())
    }
}

/// One labelled input pcap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub pcap: PathBuf,
    pub label: TrafficClass,
}

impl FromStr for DatasetEntry {
    type Err = DatasetError;

    /// `<class>=<path>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (label, path) = s.split_once('=').ok_or_else(|| DatasetError::BadEntry(s.to_owned()))?;
        if path.is_empty() {
            return Err(DatasetError::BadEntry(s.to_owned()));
        }
        let label = label
            .parse::<TrafficClass>()
            .map_err(|_| DatasetError::UnknownClass(label.to_owned()))?;
        Ok(DatasetEntry {
            pcap: PathBuf::from(path),
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub entries: Vec<DatasetEntry>,
    pub out: PathBuf,
    pub format: ImageFormat,
    pub split: SplitRatios,
    pub seed: u64,
    pub sampling: SamplingPolicy,
    /// Stop after this many images per pcap.
    pub limit: Option<u64>,
    pub transform: TransformConfig,
}

impl DatasetOptions {
    pub fn new(entries: Vec<DatasetEntry>, out: impl Into<PathBuf>) -> Self {
        DatasetOptions {
            entries,
            out: out.into(),
            format: ImageFormat::Ppm,
            split: SplitRatios::default(),
            seed: 0,
            sampling: SamplingPolicy::All,
            limit: None,
            transform: TransformConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub pcap: PathBuf,
    /// Packet index, absent when the whole file failed.
    pub packet: Option<u64>,
    pub error: String,
}

/// Written to `<out>/manifest.json`. Schema in `docs/dataset_manifest.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<DatasetEntry>,
    pub output_directory: PathBuf,
    pub format: String,
    pub seed: u64,
    pub sampling: String,
    pub split: SplitRatios,
    /// Images per class label, over all splits.
    pub counts: BTreeMap<String, u64>,
    /// Images per split, then per class.
    pub split_counts: BTreeMap<String, BTreeMap<String, u64>>,
    pub total: u64,
    pub errors: Vec<FileError>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}

/// Build the image tree and manifest. Unreadable pcaps and bad packets are
/// recorded in `errors` and skipped; only failures to write the output fail
/// the run.
pub fn build_dataset(opts: &DatasetOptions) -> Result<DatasetManifest, DatasetError> {
    if opts.entries.is_empty() {
        return Err(DatasetError::NoEntries);
    }
    opts.sampling
        .validate()
        .map_err(|e| DatasetError::Sampling(e.to_string()))?;
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(&opts.out).map_err(io(&opts.out))?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut split_counts: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut total = 0;

    for entry in &opts.entries {
        let label = entry.label.as_str();
        counts.entry(label.to_owned()).or_insert(0);
        let mut source = match FileSource::open(&entry.pcap) {
            Ok(s) => s,
            Err(e) => {
                errors.push(FileError {
                    pcap: entry.pcap.clone(),
                    packet: None,
                    error: e.to_string(),
                });
                continue;
            }
        };
        let stem = entry
            .pcap
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pcap".into());
        let mut sampler = Sampler::new(opts.sampling);
        let mut index: u64 = 0;
        let mut emitted: u64 = 0;
        loop {
            if opts.limit.is_some_and(|l| emitted >= l) {
                break;
            }
            let pkt = match source.next_packet() {
                Ok(Some(p)) => p,
                Ok(None) => break,
                Err(e) => {
                    errors.push(FileError {
                        pcap: entry.pcap.clone(),
                        packet: Some(index),
                        error: e.to_string(),
                    });
                    break;
                }
            };
            let i = index;
            index += 1;
            if !sampler.should_sample(i, pkt.timestamp()) {
                continue;
            }
            let img = match packet_to_image(&pkt.data, &opts.transform) {
                Ok(img) => img,
                Err(e) => {
                    errors.push(FileError {
                        pcap: entry.pcap.clone(),
                        packet: Some(i),
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            let split = opts.split.pick(rng.gen::<f64>());
            let dir = opts.out.join(split).join(label);
            fs::create_dir_all(&dir).map_err(io(&dir))?;
            let path = dir.join(format!("{stem}_{i}.{}", opts.format.extension()));
            write_image(&img, &path, opts.format).map_err(|e| DatasetError::Io {
                path: path.clone(),
                source: std::io::Error::other(e.to_string()),
            })?;
            *counts.get_mut(label).expect("inserted above") += 1;
            *split_counts
                .entry(split.to_owned())
                .or_default()
                .entry(label.to_owned())
                .or_insert(0) += 1;
            emitted += 1;
            total += 1;
        }
    }

    let manifest = DatasetManifest {
        entries: opts.entries.clone(),
        output_directory: opts.out.clone(),
        format: opts.format.extension().to_owned(),
        seed: opts.seed,
        sampling: opts.sampling.to_string(),
        split: opts.split,
        counts,
        split_counts,
        total,
        errors,
    };
    let path = opts.out.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_json()).map_err(io(&path))?;
    Ok(manifest)
}
