use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::{PcapError, PcapMeta, PcapReader, RawPacket};

/// Anything that yields captured packets: a replayed file or a live interface.
pub trait PacketSource: Send {
    /// `Ok(None)` ends the stream.
    fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError>;

    fn link_type(&self) -> u32;

    /// Live sources drop on backpressure; file replays block.
    fn is_live(&self) -> bool {
        false
    }
}

/// Replays a pcap file from disk.
pub struct FileSource {
    reader: PcapReader<BufReader<File>>,
}

impl FileSource {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PcapError> {
        let file = File::open(path)?;
        Ok(FileSource {
            reader: PcapReader::new(BufReader::new(file))?,
        })
    }

    pub fn meta(&self) -> &PcapMeta {
        self.reader.meta()
    }
}

impl PacketSource for FileSource {
    fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
        self.reader.next_packet()
    }

    fn link_type(&self) -> u32 {
        self.reader.meta().link_type
    }
}

/// In-memory packets, mostly for tests.
pub struct VecSource {
    packets: std::vec::IntoIter<RawPacket>,
    link_type: u32,
}

impl VecSource {
    pub fn new(packets: Vec<RawPacket>, link_type: u32) -> Self {
        VecSource {
            packets: packets.into_iter(),
            link_type,
        }
    }
}

impl PacketSource for VecSource {
    fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
        Ok(self.packets.next())
    }

    fn link_type(&self) -> u32 {
        self.link_type
    }
}

/// Delays each packet so that inter-packet gaps follow the capture
/// timestamps. Wakes at least every 50 ms to observe `stop`.
pub struct Paced<S> {
    inner: S,
    stop: Arc<AtomicBool>,
    origin: Option<(Instant, Duration)>,
}

impl<S: PacketSource> Paced<S> {
    pub fn new(inner: S, stop: Arc<AtomicBool>) -> Self {
        Paced {
            inner,
            stop,
            origin: None,
        }
    }
}

impl<S: PacketSource> PacketSource for Paced<S> {
    fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
        let Some(pkt) = self.inner.next_packet()? else {
            return Ok(None);
        };
        let ts = pkt.timestamp();
        let (wall0, ts0) = *self.origin.get_or_insert((Instant::now(), ts));
        let due = wall0 + ts.saturating_sub(ts0);
        loop {
            if self.stop.load(Ordering::Relaxed) {
                return Ok(None);
            }
            let now = Instant::now();
            if now >= due {
                break;
            }
            std::thread::sleep((due - now).min(Duration::from_millis(50)));
        }
        Ok(Some(pkt))
    }

    fn link_type(&self) -> u32 {
        self.inner.link_type()
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }
}

impl PacketSource for Box<dyn PacketSource> {
    fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
        (**self).next_packet()
    }

    fn link_type(&self) -> u32 {
        (**self).link_type()
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

/// Open a live capture on `iface`. Only available on Linux with the `live`
/// feature; otherwise returns [`PcapError::LiveUnsupported`].
pub fn open_live(iface: &str, stop: Arc<AtomicBool>) -> Result<Box<dyn PacketSource>, PcapError> {
    #[cfg(all(feature = "live", target_os = "linux"))]
    {
        Ok(Box::new(live::LiveCapture::open(iface, stop)?))
    }
    #[cfg(not(all(feature = "live", target_os = "linux")))]
    {
        let _ = stop;
        Err(PcapError::LiveUnsupported(format!(
            "interface {iface}: built without the `live` feature"
        )))
    }
}

#[cfg(all(feature = "live", target_os = "linux"))]
mod live {
    use std::ffi::CString;
    use std::io;
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::Arc;
    use std::time::{SystemTime, UNIX_EPOCH};

    use super::PacketSource;
    use crate::pcap::{PcapError, RawPacket, LINKTYPE_ETHERNET};

    const SNAPLEN: usize = 65535;

    /// AF_PACKET raw socket bound to one interface.
    pub struct LiveCapture {
        fd: libc::c_int,
        stop: Arc<AtomicBool>,
        buf: Vec<u8>,
    }

    impl LiveCapture {
        pub fn open(iface: &str, stop: Arc<AtomicBool>) -> Result<Self, PcapError> {
            let name =
                CString::new(iface).map_err(|_| PcapError::LiveUnsupported(format!("bad interface name {iface:?}")))?;
            let proto = (libc::ETH_P_ALL as u16).to_be() as libc::c_int;
            // SAFETY: plain syscalls on a descriptor we own; the sockaddr and
            // timeval are fully initialised stack values.
            unsafe {
                let ifindex = libc::if_nametoindex(name.as_ptr());
                if ifindex == 0 {
                    return Err(io::Error::last_os_error().into());
                }
                let fd = libc::socket(libc::AF_PACKET, libc::SOCK_RAW, proto);
                if fd < 0 {
                    return Err(io::Error::last_os_error().into());
                }
                let mut addr: libc::sockaddr_ll = std::mem::zeroed();
                addr.sll_family = libc::AF_PACKET as u16;
                addr.sll_protocol = proto as u16;
                addr.sll_ifindex = ifindex as i32;
                let rc = libc::bind(
                    fd,
                    &addr as *const libc::sockaddr_ll as *const libc::sockaddr,
                    std::mem::size_of::<libc::sockaddr_ll>() as u32,
                );
                let tv = libc::timeval {
                    tv_sec: 0,
                    tv_usec: 200_000,
                };
                let rc2 = libc::setsockopt(
                    fd,
                    libc::SOL_SOCKET,
                    libc::SO_RCVTIMEO,
                    &tv as *const libc::timeval as *const libc::c_void,
                    std::mem::size_of::<libc::timeval>() as u32,
                );
                if rc < 0 || rc2 < 0 {
                    let err = io::Error::last_os_error();
                    libc::close(fd);
                    return Err(err.into());
                }
                Ok(LiveCapture {
                    fd,
                    stop,
                    buf: vec![0u8; SNAPLEN],
                })
            }
        }
    }

    impl PacketSource for LiveCapture {
        fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
            loop {
                if self.stop.load(Ordering::Relaxed) {
                    return Ok(None);
                }
                // SAFETY: buf is a valid writable region of buf.len() bytes.
                let n = unsafe {
                    libc::recv(
                        self.fd,
                        self.buf.as_mut_ptr() as *mut libc::c_void,
                        self.buf.len(),
                        libc::MSG_TRUNC,
                    )
                };
                if n < 0 {
                    let err = io::Error::last_os_error();
                    match err.kind() {
                        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::Interrupted => continue,
                        _ => return Err(err.into()),
                    }
                }
                let original = n as usize;
                let captured = original.min(self.buf.len());
                let ts = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
                let mut pkt = RawPacket::new(ts, self.buf[..captured].to_vec());
                pkt.original_len = original as u32;
                return Ok(Some(pkt));
            }
        }

        fn link_type(&self) -> u32 {
            LINKTYPE_ETHERNET
        }

        fn is_live(&self) -> bool {
            true
        }
    }

    impl Drop for LiveCapture {
        fn drop(&mut self) {
            // SAFETY: fd was returned by socket() and is closed once.
            unsafe {
                libc::close(self.fd);
            }
        }
    }
}
