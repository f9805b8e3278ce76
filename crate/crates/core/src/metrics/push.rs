use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::server::CONTENT_TYPE;
use super::{MetricsError, Registry};

/// `<base>/metrics/job/<job>`, pushgateway style.
pub fn push_url(base: &str, job: &str) -> Result<String, MetricsError> {
    if !base.starts_with("http://") {
        return Err(MetricsError::Push(format!("push url must be http://, got {base:?}")));
    }
    if job.is_empty() || job.contains('/') {
        return Err(MetricsError::Push(format!("invalid job name {job:?}")));
    }
    Ok(format!("{}/metrics/job/{job}", base.trim_end_matches('/')))
}

/// PUT the current exposition once.
pub fn push_once(registry: &Registry, url: &str) -> Result<(), MetricsError> {
    let body = registry.render_exposition(registry.now());
    ureq::put(url)
        .timeout(Duration::from_secs(5))
        .set("Content-Type", CONTENT_TYPE)
        .send_string(&body)
        .map_err(|e| MetricsError::Push(e.to_string()))?;
    Ok(())
}

/// Periodic pusher. Failures are logged, counted in
/// `vinevi_push_failures`, and retried at the next tick; nothing is buffered.
pub struct PushHandle {
    stop: mpsc::Sender<()>,
    thread: Option<JoinHandle<()>>,
}

impl PushHandle {
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

impl Drop for PushHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn push(
    registry: Arc<Registry>,
    base_url: &str,
    job: &str,
    interval: Duration,
) -> Result<PushHandle, MetricsError> {
    let url = push_url(base_url, job)?;
    let (stop, rx) = mpsc::channel::<()>();
    let thread = thread::Builder::new()
        .name("metrics-push".into())
        .spawn(move || {
            while let Err(RecvTimeoutError::Timeout) = rx.recv_timeout(interval) {
                if let Err(e) = push_once(&registry, &url) {
                    registry.inc_push_failures();
                    log::warn!("push to {url} failed: {e}");
                }
            }
        })
        .map_err(|e| MetricsError::Push(e.to_string()))?;
    Ok(PushHandle {
        stop,
        thread: Some(thread),
    })
}
