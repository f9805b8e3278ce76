//! Host CPU and memory from procfs.

use std::fs;
use std::path::Path;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use thiserror::Error;

use super::Registry;

/// Spacing between the two `/proc/stat` reads of one CPU sample.
pub const CPU_SAMPLE_SPACING: Duration = Duration::from_millis(100);

#[derive(Debug, Error)]
pub enum HostError {
    #[error("Unsupported: {0}")]
    Unsupported(String),
    #[error("malformed {file}: {reason}")]
    Parse { file: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostMetrics {
    /// `[0, 100]`.
    pub cpu_percent: f64,
    pub mem_total: u64,
    pub mem_available: u64,
}

/// Aggregate jiffies from the `cpu` line of `/proc/stat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpuTimes {
    pub busy: u64,
    pub total: u64,
}

/// Parse the aggregate `cpu` line. Busy is everything except idle and
/// iowait; guest time is already folded into user by the kernel.
pub fn parse_proc_stat(text: &str) -> Result<CpuTimes, HostError> {
    let line = text
        .lines()
        .find(|l| l.starts_with("cpu "))
        .ok_or_else(|| HostError::Parse {
            file: "/proc/stat",
            reason: "no aggregate cpu line".into(),
        })?;
    let fields: Vec<u64> = line
        .split_whitespace()
        .skip(1)
        .take(8)
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| HostError::Parse {
            file: "/proc/stat",
            reason: format!("{e}"),
        })?;
    if fields.len() < 4 {
        return Err(HostError::Parse {
            file: "/proc/stat",
            reason: format!("only {} cpu fields", fields.len()),
        });
    }
    let total: u64 = fields.iter().sum();
    let idle = fields[3] + fields.get(4).copied().unwrap_or(0);
    Ok(CpuTimes {
        busy: total - idle,
        total,
    })
}

/// `100 * Δbusy / Δtotal`, clamped to `[0, 100]`; 0 when no time passed.
pub fn cpu_percent(before: CpuTimes, after: CpuTimes) -> f64 {
    let dt = after.total.saturating_sub(before.total);
    if dt == 0 {
        return 0.0;
    }
    let db = after.busy.saturating_sub(before.busy);
    (100.0 * db as f64 / dt as f64).clamp(0.0, 100.0)
}

/// `(MemTotal, MemAvailable)` in bytes.
pub fn parse_meminfo(text: &str) -> Result<(u64, u64), HostError> {
    let field = |name: &str| -> Result<u64, HostError> {
        let line = text
            .lines()
            .find(|l| l.split(':').next() == Some(name))
            .ok_or_else(|| HostError::Parse {
                file: "/proc/meminfo",
                reason: format!("missing {name}"),
            })?;
        let mut parts = line.split(':').nth(1).unwrap_or("").split_whitespace();
        let value: u64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| HostError::Parse {
                file: "/proc/meminfo",
                reason: format!("bad value for {name}"),
            })?;
        let scale = match parts.next() {
            Some("kB") => 1024,
            None => 1,
            Some(unit) => {
                return Err(HostError::Parse {
                    file: "/proc/meminfo",
                    reason: format!("unknown unit {unit}"),
                })
            }
        };
        Ok(value * scale)
    };
    let total = field("MemTotal")?;
    let available = field("MemAvailable")?.min(total);
    Ok((total, available))
}

fn read(root: &Path, name: &str) -> Result<String, HostError> {
    let path = root.join(name);
    fs::read_to_string(&path).map_err(|e| HostError::Unsupported(format!("{}: {e}", path.display())))
}

/// Sample host metrics from a procfs-shaped directory, reading `stat`
/// twice `spacing` apart.
pub fn collect_host_from(root: &Path, spacing: Duration) -> Result<HostMetrics, HostError> {
    let before = parse_proc_stat(&read(root, "stat")?)?;
    thread::sleep(spacing);
    let after = parse_proc_stat(&read(root, "stat")?)?;
    let (mem_total, mem_available) = parse_meminfo(&read(root, "meminfo")?)?;
    Ok(HostMetrics {
        cpu_percent: cpu_percent(before, after),
        mem_total,
        mem_available,
    })
}

pub fn collect_host() -> Result<HostMetrics, HostError> {
    collect_host_from(Path::new("/proc"), CPU_SAMPLE_SPACING)
}

/// CPU time consumed by this process.
pub fn process_cpu_time() -> Result<Duration, HostError> {
    let text = read(Path::new("/proc/self"), "stat")?;
    parse_process_stat(&text, clock_ticks_per_second())
}

fn clock_ticks_per_second() -> u64 {
    // SAFETY: sysconf has no preconditions.
    let ticks = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if ticks > 0 {
        ticks as u64
    } else {
        100
    }
}

/// `utime + stime` from a `/proc/<pid>/stat` line.
pub fn parse_process_stat(text: &str, ticks_per_second: u64) -> Result<Duration, HostError> {
    let bad = |reason: &str| HostError::Parse {
        file: "/proc/self/stat",
        reason: reason.into(),
    };
    // comm may contain spaces and parentheses; fields resume after the last ')'
    let rest = &text[text.rfind(')').ok_or_else(|| bad("no comm field"))? + 1..];
    let fields: Vec<&str> = rest.split_whitespace().collect();
    // rest starts at field 3 (state); utime is field 14, stime 15
    let parse = |i: usize| -> Result<u64, HostError> {
        fields
            .get(i)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing utime/stime"))
    };
    let ticks = parse(11)? + parse(12)?;
    Ok(Duration::from_nanos(ticks * 1_000_000_000 / ticks_per_second))
}

/// Background thread refreshing the registry's host gauges.
pub struct HostSampler {
    stop: mpsc::Sender<()>,
    thread: Option<JoinHandle<()>>,
}

impl HostSampler {
    pub fn spawn(registry: Arc<Registry>, interval: Duration) -> Self {
        let (stop, rx) = mpsc::channel::<()>();
        let thread = thread::Builder::new()
            .name("host-sampler".into())
            .spawn(move || loop {
                match collect_host() {
                    Ok(h) => registry.set_host(Some(h)),
                    Err(e) => {
                        log::debug!("host metrics unavailable: {e}");
                        registry.set_host(None);
                    }
                }
                match rx.recv_timeout(interval) {
                    Err(RecvTimeoutError::Timeout) => {}
                    _ => break,
                }
            })
            .expect("spawn host sampler");
        HostSampler {
            stop,
            thread: Some(thread),
        }
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        let _ = self.stop.send(());
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for HostSampler {
    fn drop(&mut self) {
        self.shutdown();
    }
}
