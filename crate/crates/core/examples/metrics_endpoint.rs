//! Record some classifications, close a window, and serve the gauges.
//!
//!     cargo run --example metrics_endpoint -- [127.0.0.1:9155] [seconds]

use std::io::Read;
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use vinevi::metrics::{collect_host, serve, Registry};
use vinevi::TrafficClass;

fn main() {
    let addr = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:0".into());
    let linger: u64 = std::env::args().nth(2).map_or(0, |s| s.parse().unwrap());

    let registry = Arc::new(Registry::new(Duration::from_secs(10)));
    let now = registry.now();
    for (i, class) in TrafficClass::ALL.iter().enumerate() {
        for _ in 0..=i {
            registry.record(*class, 100, now);
        }
    }
    registry.close_window(now + Duration::from_secs(10));
    registry.set_host(collect_host().ok());

    let server = serve(registry.clone(), addr.as_str()).unwrap();
    println!("serving http://{}/metrics", server.addr());

    let mut conn = TcpStream::connect(server.addr()).unwrap();
    std::io::Write::write_all(
        &mut conn,
        b"GET /metrics HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n",
    )
    .unwrap();
    let mut response = String::new();
    conn.read_to_string(&mut response).unwrap();
    println!("{response}");

    std::thread::sleep(Duration::from_secs(linger));
    server.stop();
}
