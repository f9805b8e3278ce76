//! Packet to traffic class, through the CNN or through a port heuristic.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{ClassScores, Model, NnError};
use crate::pcap::{extract_flow_key, RawPacket, IPPROTO_UDP};
use crate::vision::{normalize, packet_to_image, PacketImage, TransformConfig, VisionError};

/// The seven application classes, in wire (alphabetical) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Bittorrent,
    Browsing,
    Dns,
    Iot,
    Rdp,
    Ssh,
    Voip,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 7] = [
        TrafficClass::Bittorrent,
        TrafficClass::Browsing,
        TrafficClass::Dns,
        TrafficClass::Iot,
        TrafficClass::Rdp,
        TrafficClass::Ssh,
        TrafficClass::Voip,
    ];

    pub const COUNT: usize = 7;

    pub fn as_str(self) -> &'static str {
        match self {
            TrafficClass::Bittorrent => "bittorrent",
            TrafficClass::Browsing => "browsing",
            TrafficClass::Dns => "dns",
            TrafficClass::Iot => "iot",
            TrafficClass::Rdp => "rdp",
            TrafficClass::Ssh => "ssh",
            TrafficClass::Voip => "voip",
        }
    }

    /// Position in [`TrafficClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for TrafficClass {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrafficClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ClassifyError::UnknownClass(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultSource {
    Model,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationResult {
    pub class: TrafficClass,
    /// In `[0, 1]`.
    pub confidence: f64,
    pub latency: Duration,
    pub source: ResultSource,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("LabelMismatch: {0}")]
    LabelMismatch(String),
    #[error("unknown traffic class {0:?} (expected one of bittorrent, browsing, dns, iot, rdp, ssh, voip)")]
    UnknownClass(String),
    #[error(transparent)]
    Vision(#[from] VisionError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// The CNN path: transform, normalise, forward, argmax.
#[derive(Debug, Clone)]
pub struct ModelClassifier {
    model: Arc<Model>,
    transform: TransformConfig,
    /// Traffic class of each model output index.
    classes: Vec<TrafficClass>,
}

impl ModelClassifier {
    /// Fails with `LabelMismatch` unless the model's labels are exactly the
    /// seven class names, in any order.
    pub fn new(model: Arc<Model>, transform: TransformConfig) -> Result<Self, ClassifyError> {
        let labels = model.class_labels();
        if labels.len() != TrafficClass::COUNT {
            return Err(ClassifyError::LabelMismatch(format!(
                "model {:?} has {} class labels, expected the 7 traffic classes",
                model.name(),
                labels.len()
            )));
        }
        let mut classes = Vec::with_capacity(labels.len());
        for l in labels {
            let c: TrafficClass = l
                .parse()
                .map_err(|_| ClassifyError::LabelMismatch(format!("model label {l:?} is not a traffic class")))?;
            if classes.contains(&c) {
                return Err(ClassifyError::LabelMismatch(format!("model label {l:?} appears twice")));
            }
            classes.push(c);
        }
        Ok(ModelClassifier {
            model,
            transform,
            classes,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn transform(&self) -> &TransformConfig {
        &self.transform
    }

    pub fn scores(&self, img: &PacketImage) -> Result<ClassScores, ClassifyError> {
        let norm = self.model.normalization();
        let input = normalize(img, norm.mean, norm.std)?;
        Ok(self.model.forward(&input)?)
    }

    /// Class and confidence for an already transformed image.
    pub fn predict_image(&self, img: &PacketImage) -> Result<(TrafficClass, f64), ClassifyError> {
        let scores = self.scores(img)?;
        let i = scores.argmax().expect("validated model has outputs");
        Ok((self.classes[i], scores[i].clamp(0.0, 1.0)))
    }

    /// Latency covers transform and forward pass.
    pub fn classify(&self, pkt: &RawPacket) -> Result<ClassificationResult, ClassifyError> {
        let start = Instant::now();
        let img = packet_to_image(&pkt.data, &self.transform)?;
        let (class, confidence) = self.predict_image(&img)?;
        Ok(ClassificationResult {
            class,
            confidence,
            latency: start.elapsed(),
            source: ResultSource::Model,
        })
    }
}

/// Single-port rules, checked before ranges.
fn exact_port(port: u16) -> Option<TrafficClass> {
    Some(match port {
        53 => TrafficClass::Dns,
        22 => TrafficClass::Ssh,
        3389 => TrafficClass::Rdp,
        5060 | 5061 => TrafficClass::Voip,
        80 | 443 | 8080 => TrafficClass::Browsing,
        1883 | 8883 | 5683 => TrafficClass::Iot,
        _ => return None,
    })
}

fn port_range(port: u16, proto: u8) -> Option<TrafficClass> {
    match port {
        6881..=6889 => Some(TrafficClass::Bittorrent),
        16384..=32767 if proto == IPPROTO_UDP => Some(TrafficClass::Voip),
        _ => None,
    }
}

/// Well-known-port lookup, source port before destination.
///
/// Single-port rules are tried on both ports before the ranges, so a
/// 16384-32767 ephemeral port never shadows a well-known one. Anything
/// unmatched is `browsing` with confidence 0.5.
pub fn classify_heuristic(pkt: &RawPacket, link_type: u32) -> ClassificationResult {
    let start = Instant::now();
    let hit = extract_flow_key(pkt, link_type).and_then(|key| {
        key.ports()
            .find_map(exact_port)
            .or_else(|| key.ports().find_map(|p| port_range(p, key.ip_proto)))
    });
    let (class, confidence) = match hit {
        Some(c) => (c, 1.0),
        None => (TrafficClass::Browsing, 0.5),
    };
    ClassificationResult {
        class,
        confidence,
        latency: start.elapsed(),
        source: ResultSource::Heuristic,
    }
}

/// Either classification path, ready to share across workers.
#[derive(Debug, Clone)]
pub enum Classifier {
    Heuristic,
    Model(ModelClassifier),
}

impl Classifier {
    pub fn classify(&self, pkt: &RawPacket, link_type: u32) -> Result<ClassificationResult, ClassifyError> {
        match self {
            Classifier::Heuristic => Ok(classify_heuristic(pkt, link_type)),
            Classifier::Model(m) => m.classify(pkt),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Classifier::Heuristic => "port heuristic".to_owned(),
            Classifier::Model(m) => format!("model {}", m.model().name()),
        }
    }
}
