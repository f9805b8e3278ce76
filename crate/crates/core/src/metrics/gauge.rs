use std::fmt::Write;

/// One gauge sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    pub name: String,
    pub help: String,
    /// Sorted by key, then value.
    pub labels: Vec<(String, String)>,
    pub value: f64,
}

impl Gauge {
    /// Panics on a name outside `[a-zA-Z_:][a-zA-Z0-9_:]*`; names are
    /// compile-time constants in this crate.
    pub fn new(name: &str, help: &str, value: f64) -> Self {
        assert!(valid_metric_name(name), "invalid metric name {name:?}");
        Gauge {
            name: name.to_owned(),
            help: help.to_owned(),
            labels: Vec::new(),
            value,
        }
    }

    pub fn with_label(mut self, key: &str, value: &str) -> Self {
        assert!(valid_label_name(key), "invalid label name {key:?}");
        self.labels.push((key.to_owned(), value.to_owned()));
        self.labels.sort();
        self
    }
}

pub fn valid_metric_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == ':')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == ':')
}

fn valid_label_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Shortest decimal that round-trips: `3` for 3.0, `2.5` for 2.5.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "+Inf" } else { "-Inf" }.to_owned()
    } else if v == 0.0 {
        "0".to_owned()
    } else {
        format!("{v}")
    }
}

fn escape_label_value(v: &str, out: &mut String) {
    for c in v.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
}

fn escape_help(v: &str, out: &mut String) {
    for c in v.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
}

/// Render gauges in text exposition format 0.0.4.
///
/// Families come out in alphabetical order with one `# HELP`/`# TYPE`
/// pair each; samples within a family are ordered by label set. The help
/// text of a family is taken from its first gauge.
pub fn render(gauges: &[Gauge]) -> String {
    let mut sorted: Vec<&Gauge> = gauges.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.labels.cmp(&b.labels)));
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for g in sorted {
        if current != Some(g.name.as_str()) {
            out.push_str("# HELP ");
            out.push_str(&g.name);
            out.push(' ');
            escape_help(&g.help, &mut out);
            out.push('\n');
            let _ = writeln!(out, "# TYPE {} gauge", g.name);
            current = Some(g.name.as_str());
        }
        out.push_str(&g.name);
        if !g.labels.is_empty() {
            out.push('{');
            for (i, (k, v)) in g.labels.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(k);
                out.push_str("=\"");
                escape_label_value(v, &mut out);
                out.push('"');
            }
            out.push('}');
        }
        out.push(' ');
        out.push_str(&format_value(g.value));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_formatting() {
        assert_eq!(format_value(2.5), "2.5");
        assert_eq!(format_value(3.0), "3");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(16_777_216.0), "16777216");
        assert_eq!(format_value(0.1), "0.1");
        assert_eq!(format_value(f64::INFINITY), "+Inf");
        assert_eq!(format_value(f64::NAN), "NaN");
    }

    #[test]
    fn names() {
        assert!(valid_metric_name("vinevi_traffic_class_packets"));
        assert!(valid_metric_name(":a:b_1"));
        assert!(!valid_metric_name("1abc"));
        assert!(!valid_metric_name("a-b"));
        assert!(!valid_metric_name(""));
    }

    #[test]
    fn family_layout() {
        let gauges = vec![
            Gauge::new("b_metric", "second", 1.0).with_label("class", "z"),
            Gauge::new("a_metric", "first", 2.5),
            Gauge::new("b_metric", "second", 3.0).with_label("class", "a"),
        ];
        assert_eq!(
            render(&gauges),
            "# HELP a_metric first\n# TYPE a_metric gauge\na_metric 2.5\n\
             # HELP b_metric second\n# TYPE b_metric gauge\n\
             b_metric{class=\"a\"} 3\nb_metric{class=\"z\"} 1\n"
        );
    }

    #[test]
    fn escaping() {
        let g = Gauge::new("m", "line\\one\ntwo", 1.0).with_label("l", "a\"b\\c\nd");
        assert_eq!(
            render(&[g]),
            "# HELP m line\\\\one\\ntwo\n# TYPE m gauge\nm{l=\"a\\\"b\\\\c\\nd\"} 1\n"
        );
    }

    #[test]
    fn labels_sorted() {
        let g = Gauge::new("m", "h", 1.0).with_label("z", "1").with_label("a", "2");
        assert_eq!(g.labels[0].0, "a");
    }
}
