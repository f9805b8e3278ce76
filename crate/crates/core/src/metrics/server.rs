use std::net::{SocketAddr, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use tiny_http::{Header, Method, Response, Server};

use super::{MetricsError, Registry};

pub const CONTENT_TYPE: &str = "text/plain; version=0.0.4";

/// Running `/metrics` endpoint. Stops on [`ServerHandle::stop`] or drop.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// The bound address; useful with port 0.
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Serve `GET /metrics` and `GET /healthz` on `listen`.
pub fn serve(registry: Arc<Registry>, listen: impl ToSocketAddrs) -> Result<ServerHandle, MetricsError> {
    let addr = listen
        .to_socket_addrs()
        .map_err(|e| MetricsError::Bind(e.to_string()))?
        .next()
        .ok_or_else(|| MetricsError::Bind("address resolves to nothing".into()))?;
    let server = Arc::new(Server::http(addr).map_err(|e| MetricsError::Bind(format!("{addr}: {e}")))?);
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| MetricsError::Bind("not an IP listener".into()))?;
    let worker = server.clone();
    let thread = thread::Builder::new()
        .name("metrics-http".into())
        .spawn(move || {
            for request in worker.incoming_requests() {
                let path = request.url().split('?').next().unwrap_or("").to_owned();
                let response = match (request.method(), path.as_str()) {
                    (Method::Get, "/metrics") => {
                        let body = registry.render_exposition(registry.now());
                        Response::from_string(body)
                            .with_header(Header::from_bytes("Content-Type", CONTENT_TYPE).expect("static header"))
                    }
                    (Method::Get, "/healthz") => Response::from_string("ok"),
                    (_, "/metrics" | "/healthz") => Response::from_string("method not allowed").with_status_code(405),
                    _ => Response::from_string("not found").with_status_code(404),
                };
                if let Err(e) = request.respond(response) {
                    log::debug!("metrics response failed: {e}");
                }
            }
        })
        .map_err(|e| MetricsError::Bind(e.to_string()))?;
    log::info!("serving metrics on http://{addr}/metrics");
    Ok(ServerHandle {
        addr,
        server,
        thread: Some(thread),
    })
}
