//! Classic pcap capture files and packet sources.
//!
//! Both byte orders and both timestamp resolutions (microsecond magic
//! `0xa1b2c3d4`, nanosecond magic `0xa1b23c4d`) are accepted. pcapng is not.
//!
//! Reading is streaming: parse the 24-byte global header with
//! [`parse_pcap_header`], then pull records with [`PcapReader::next_packet`].
//! [`PcapWriter`] produces files the reader accepts, which is how the test
//! corpus and the dataset fixtures are built.

mod file;
mod flow;
mod source;
pub mod synth;

pub use file::*;
pub use flow::*;
pub use source::*;

use thiserror::Error;

/// `LINKTYPE_ETHERNET`.
pub const LINKTYPE_ETHERNET: u32 = 1;
/// `LINKTYPE_RAW`: the record starts directly with an IPv4 or IPv6 header.
pub const LINKTYPE_RAW: u32 = 101;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("BadMagic: not a classic pcap file (magic {0:#010x})")]
    BadMagic(u32),
    #[error("UnsupportedVersion: {major}.{minor} (only 2.4 is supported)")]
    UnsupportedVersion { major: u16, minor: u16 },
    #[error("invalid snaplen {0}")]
    InvalidSnaplen(u32),
    #[error("Truncated: record needs {expected} bytes, only {available} left")]
    Truncated { expected: usize, available: usize },
    #[error("CorruptHeader: captured length {captured_len} exceeds snaplen {snaplen}")]
    CorruptHeader { captured_len: u32, snaplen: u32 },
    #[error("CorruptHeader: captured length {captured_len} exceeds original length {original_len}")]
    CapturedExceedsOriginal { captured_len: u32, original_len: u32 },
    #[error("live capture is not available: {0}")]
    LiveUnsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
