#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use vinevi::pcap::synth::{self, Transport};
use vinevi::pcap::RawPacket;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    pub value: f64,
}

fn is_metric_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == ':')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
}

fn is_label_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_value(s: &str) -> Result<f64, String> {
    match s {
        "+Inf" => Ok(f64::INFINITY),
        "-Inf" => Ok(f64::NEG_INFINITY),
        "NaN" => Ok(f64::NAN),
        _ => s.parse::<f64>().map_err(|_| format!("bad value {s:?}")),
    }
}

/// `{a="x",b="y"}` starting at `s[0] == '{'`; returns labels and the rest.
fn parse_labels(s: &str) -> Result<(BTreeMap<String, String>, &str), String> {
    let mut labels = BTreeMap::new();
    let mut rest = &s[1..];
    loop {
        if let Some(r) = rest.strip_prefix('}') {
            return Ok((labels, r));
        }
        let eq = rest.find('=').ok_or("label without =")?;
        let name = &rest[..eq];
        if !is_label_name(name) {
            return Err(format!("bad label name {name:?}"));
        }
        rest = rest[eq + 1..].strip_prefix('"').ok_or("label value not quoted")?;
        let mut value = String::new();
        let mut chars = rest.char_indices();
        let end = loop {
            match chars.next() {
                None => return Err("unterminated label value".into()),
                Some((i, '"')) => break i,
                Some((_, '\\')) => match chars.next() {
                    Some((_, '\\')) => value.push('\\'),
                    Some((_, '"')) => value.push('"'),
                    Some((_, 'n')) => value.push('\n'),
                    other => return Err(format!("bad escape {other:?}")),
                },
                Some((_, '\n')) => return Err("raw newline in label value".into()),
                Some((_, c)) => value.push(c),
            }
        };
        if labels.insert(name.to_owned(), value).is_some() {
            return Err(format!("duplicate label {name}"));
        }
        rest = &rest[end + 1..];
        if let Some(r) = rest.strip_prefix(',') {
            rest = r;
        } else if !rest.starts_with('}') {
            return Err("expected , or } after label".into());
        }
    }
}

/// Parse a text exposition body (format 0.0.4). Checks metric and label
/// names, escapes, values, at most one HELP and TYPE per family, TYPE before
/// the family's samples, families contiguous, and no duplicate series.
pub fn parse_exposition(body: &str) -> Result<Vec<Sample>, String> {
    let mut samples = Vec::new();
    let mut typed: HashSet<String> = HashSet::new();
    let mut helped: HashSet<String> = HashSet::new();
    let mut finished: HashSet<String> = HashSet::new();
    let mut current: Option<String> = None;
    let mut series: HashSet<(String, BTreeMap<String, String>)> = HashSet::new();
    if !body.is_empty() && !body.ends_with('\n') {
        return Err("body must end with a newline".into());
    }
    let mut switch = |name: &str, current: &mut Option<String>| -> Result<(), String> {
        if current.as_deref() != Some(name) {
            if finished.contains(name) {
                return Err(format!("family {name} is not contiguous"));
            }
            if let Some(prev) = current.take() {
                finished.insert(prev);
            }
            *current = Some(name.to_owned());
        }
        Ok(())
    };
    for (n, line) in body.lines().enumerate() {
        let err = |m: String| format!("line {}: {m}: {line:?}", n + 1);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut parts = comment.trim_start().splitn(3, ' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some("HELP"), Some(name), _) => {
                    if !is_metric_name(name) {
                        return Err(err("bad metric name".into()));
                    }
                    switch(name, &mut current).map_err(err)?;
                    if !helped.insert(name.to_owned()) {
                        return Err(err("second HELP".into()));
                    }
                }
                (Some("TYPE"), Some(name), Some(kind)) => {
                    if !is_metric_name(name) {
                        return Err(err("bad metric name".into()));
                    }
                    if !["counter", "gauge", "histogram", "summary", "untyped"].contains(&kind) {
                        return Err(err(format!("bad type {kind}")));
                    }
                    switch(name, &mut current).map_err(err)?;
                    if samples.iter().any(|s: &Sample| s.name == name) {
                        return Err(err("TYPE after samples".into()));
                    }
                    if !typed.insert(name.to_owned()) {
                        return Err(err("second TYPE".into()));
                    }
                }
                _ => {}
            }
            continue;
        }
        let name_end = line.find(['{', ' ']).ok_or_else(|| err("no value".into()))?;
        let name = &line[..name_end];
        if !is_metric_name(name) {
            return Err(err("bad metric name".into()));
        }
        let (labels, rest) = if line[name_end..].starts_with('{') {
            parse_labels(&line[name_end..]).map_err(err)?
        } else {
            (BTreeMap::new(), &line[name_end..])
        };
        let mut fields = rest
            .strip_prefix(' ')
            .ok_or_else(|| err("missing space".into()))?
            .split(' ');
        let value = parse_value(fields.next().unwrap_or("")).map_err(err)?;
        if let Some(ts) = fields.next() {
            ts.parse::<i64>().map_err(|_| err("bad timestamp".into()))?;
        }
        if fields.next().is_some() {
            return Err(err("trailing fields".into()));
        }
        switch(name, &mut current).map_err(err)?;
        if !series.insert((name.to_owned(), labels.clone())) {
            return Err(err("duplicate series".into()));
        }
        samples.push(Sample {
            name: name.to_owned(),
            labels,
            value,
        });
    }
    Ok(samples)
}

/// Value of the series `name{label=value}`.
pub fn sample_value(samples: &[Sample], name: &str, label: Option<(&str, &str)>) -> Option<f64> {
    samples
        .iter()
        .find(|s| {
            s.name == name
                && match label {
                    Some((k, v)) => s.labels.get(k).map(String::as_str) == Some(v),
                    None => s.labels.is_empty(),
                }
        })
        .map(|s| s.value)
}

/// `n` frames to `port`, one per `spacing`, as an Ethernet pcap file.
pub fn write_port_pcap(
    dir: &Path,
    name: &str,
    transport: Transport,
    port: u16,
    n: usize,
    spacing: Duration,
) -> PathBuf {
    let frames = (0..n)
        .map(|i| synth::class_frame(transport, port, i as u32, 20 + i % 50))
        .collect();
    write_packets(
        dir,
        name,
        &synth::stamp(frames, Duration::from_secs(1_700_000_000), spacing),
    )
}

pub fn write_packets(dir: &Path, name: &str, packets: &[RawPacket]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, synth::ethernet_capture(packets).unwrap()).unwrap();
    path
}

/// The 7-class mixed capture, `n` packets 1 ms apart.
pub fn write_mixed_pcap(dir: &Path, name: &str, n: usize) -> PathBuf {
    let frames = synth::mixed_frames(n).into_iter().map(|(_, f)| f).collect();
    write_packets(
        dir,
        name,
        &synth::stamp(frames, Duration::ZERO, Duration::from_millis(1)),
    )
}

/// Check `value` against the subset of JSON Schema the docs use: `$ref`,
/// `type`, `enum`, `required`, `properties`, `items`, `oneOf` and
/// `additionalProperties`.
pub fn check_schema(
    root: &serde_json::Value,
    schema: &serde_json::Value,
    value: &serde_json::Value,
) -> Result<(), String> {
    use serde_json::Value;
    if let Some(r) = schema["$ref"].as_str() {
        let name = r.strip_prefix("#/$defs/").ok_or("only local refs")?;
        return check_schema(root, &root["$defs"][name], value);
    }
    if let Some(options) = schema["oneOf"].as_array() {
        let matching = options.iter().filter(|o| check_schema(root, o, value).is_ok()).count();
        return if matching == 1 {
            Ok(())
        } else {
            Err(format!("{matching} oneOf branches match {value}"))
        };
    }
    let type_ok = |t: &str| match t {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        "null" => value.is_null(),
        _ => false,
    };
    let types: Vec<&str> = match &schema["type"] {
        Value::String(t) => vec![t.as_str()],
        Value::Array(ts) => ts.iter().filter_map(Value::as_str).collect(),
        _ => vec![],
    };
    if !types.is_empty() && !types.iter().any(|t| type_ok(t)) {
        return Err(format!("{value} is not {types:?}"));
    }
    if let Some(allowed) = schema["enum"].as_array() {
        if !allowed.contains(value) {
            return Err(format!("{value} not in {allowed:?}"));
        }
    }
    for key in schema["required"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(Value::as_str)
    {
        if value.get(key).is_none() {
            return Err(format!("missing {key} in {value}"));
        }
    }
    if let Some(obj) = value.as_object() {
        for (k, v) in obj {
            if let Some(sub) = schema["properties"].get(k) {
                check_schema(root, sub, v)?;
            } else if schema["additionalProperties"].is_object() {
                check_schema(root, &schema["additionalProperties"], v)?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for v in arr {
            check_schema(root, items, v)?;
        }
    }
    Ok(())
}
