use std::io::{self, Read, Write};
use std::time::Duration;

use super::PcapError;

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
const MAGIC_NANOS: u32 = 0xa1b2_3c4d;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

impl ByteOrder {
    fn u16(self, b: [u8; 2]) -> u16 {
        match self {
            ByteOrder::Little => u16::from_le_bytes(b),
            ByteOrder::Big => u16::from_be_bytes(b),
        }
    }

    fn u32(self, b: [u8; 4]) -> u32 {
        match self {
            ByteOrder::Little => u32::from_le_bytes(b),
            ByteOrder::Big => u32::from_be_bytes(b),
        }
    }

    fn put_u16(self, v: u16) -> [u8; 2] {
        match self {
            ByteOrder::Little => v.to_le_bytes(),
            ByteOrder::Big => v.to_be_bytes(),
        }
    }

    fn put_u32(self, v: u32) -> [u8; 4] {
        match self {
            ByteOrder::Little => v.to_le_bytes(),
            ByteOrder::Big => v.to_be_bytes(),
        }
    }
}

/// Unit of the fractional timestamp field, selected by the magic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsResolution {
    Micros,
    Nanos,
}

impl TsResolution {
    fn magic(self) -> u32 {
        match self {
            TsResolution::Micros => MAGIC_MICROS,
            TsResolution::Nanos => MAGIC_NANOS,
        }
    }
}

/// Decoded global header of a classic pcap file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcapMeta {
    pub byte_order: ByteOrder,
    pub ts_resolution: TsResolution,
    pub version_major: u16,
    pub version_minor: u16,
    pub thiszone: i32,
    pub sigfigs: u32,
    pub snaplen: u32,
    pub link_type: u32,
}

impl PcapMeta {
    /// A version 2.4 header with zero timezone and accuracy fields.
    pub fn new(byte_order: ByteOrder, ts_resolution: TsResolution, snaplen: u32, link_type: u32) -> Self {
        PcapMeta {
            byte_order,
            ts_resolution,
            version_major: 2,
            version_minor: 4,
            thiszone: 0,
            sigfigs: 0,
            snaplen,
            link_type,
        }
    }

    pub fn to_bytes(&self) -> [u8; GLOBAL_HEADER_LEN] {
        let o = self.byte_order;
        let mut out = [0u8; GLOBAL_HEADER_LEN];
        out[0..4].copy_from_slice(&o.put_u32(self.ts_resolution.magic()));
        out[4..6].copy_from_slice(&o.put_u16(self.version_major));
        out[6..8].copy_from_slice(&o.put_u16(self.version_minor));
        out[8..12].copy_from_slice(&o.put_u32(self.thiszone as u32));
        out[12..16].copy_from_slice(&o.put_u32(self.sigfigs));
        out[16..20].copy_from_slice(&o.put_u32(self.snaplen));
        out[20..24].copy_from_slice(&o.put_u32(self.link_type));
        out
    }
}

/// Decode the 24-byte global header, inferring byte order from the magic.
pub fn parse_pcap_header(bytes: &[u8; GLOBAL_HEADER_LEN]) -> Result<PcapMeta, PcapError> {
    let magic_le = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let (byte_order, ts_resolution) = match magic_le {
        MAGIC_MICROS => (ByteOrder::Little, TsResolution::Micros),
        MAGIC_NANOS => (ByteOrder::Little, TsResolution::Nanos),
        m if m.swap_bytes() == MAGIC_MICROS => (ByteOrder::Big, TsResolution::Micros),
        m if m.swap_bytes() == MAGIC_NANOS => (ByteOrder::Big, TsResolution::Nanos),
        m => return Err(PcapError::BadMagic(m.swap_bytes())),
    };
    let o = byte_order;
    let field = |at: usize| o.u32([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version_major = o.u16([bytes[4], bytes[5]]);
    let version_minor = o.u16([bytes[6], bytes[7]]);
    if (version_major, version_minor) != (2, 4) {
        return Err(PcapError::UnsupportedVersion {
            major: version_major,
            minor: version_minor,
        });
    }
    let snaplen = field(16);
    if snaplen == 0 {
        return Err(PcapError::InvalidSnaplen(snaplen));
    }
    Ok(PcapMeta {
        byte_order,
        ts_resolution,
        version_major,
        version_minor,
        thiszone: field(8) as i32,
        sigfigs: field(12),
        snaplen,
        link_type: field(20),
    })
}

/// One captured packet. Immutable once read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPacket {
    pub ts_sec: u32,
    /// Microseconds or nanoseconds, per `ts_resolution`.
    pub ts_frac: u32,
    pub ts_resolution: TsResolution,
    pub captured_len: u32,
    pub original_len: u32,
    pub data: Vec<u8>,
}

impl RawPacket {
    /// A fully captured packet (`captured_len == original_len`).
    pub fn new(timestamp: Duration, data: Vec<u8>) -> Self {
        let len = data.len() as u32;
        RawPacket {
            ts_sec: timestamp.as_secs() as u32,
            ts_frac: timestamp.subsec_micros(),
            ts_resolution: TsResolution::Micros,
            captured_len: len,
            original_len: len,
            data,
        }
    }

    pub fn timestamp(&self) -> Duration {
        let nanos = match self.ts_resolution {
            TsResolution::Micros => u64::from(self.ts_frac) * 1_000,
            TsResolution::Nanos => u64::from(self.ts_frac),
        };
        Duration::from_secs(u64::from(self.ts_sec)) + Duration::from_nanos(nanos)
    }
}

/// Reads `buf.len()` bytes unless EOF comes first; returns the count read.
fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Decode the next record from `reader`. `Ok(None)` is a clean end of file.
pub fn next_packet<R: Read>(reader: &mut R, meta: &PcapMeta) -> Result<Option<RawPacket>, PcapError> {
    let mut hdr = [0u8; RECORD_HEADER_LEN];
    let got = read_full(reader, &mut hdr)?;
    if got == 0 {
        return Ok(None);
    }
    if got < RECORD_HEADER_LEN {
        return Err(PcapError::Truncated {
            expected: RECORD_HEADER_LEN,
            available: got,
        });
    }
    let o = meta.byte_order;
    let field = |at: usize| o.u32([hdr[at], hdr[at + 1], hdr[at + 2], hdr[at + 3]]);
    let (ts_sec, ts_frac, captured_len, original_len) = (field(0), field(4), field(8), field(12));
    if captured_len > meta.snaplen {
        return Err(PcapError::CorruptHeader {
            captured_len,
            snaplen: meta.snaplen,
        });
    }
    if captured_len > original_len {
        return Err(PcapError::CapturedExceedsOriginal {
            captured_len,
            original_len,
        });
    }
    let mut data = vec![0u8; captured_len as usize];
    let got = read_full(reader, &mut data)?;
    if got < data.len() {
        return Err(PcapError::Truncated {
            expected: data.len(),
            available: got,
        });
    }
    Ok(Some(RawPacket {
        ts_sec,
        ts_frac,
        ts_resolution: meta.ts_resolution,
        captured_len,
        original_len,
        data,
    }))
}

/// Streaming reader over a classic pcap file.
///
/// After the first error the stream is finished: later calls return
/// `Ok(None)`, so a truncated tail is reported exactly once.
pub struct PcapReader<R> {
    inner: R,
    meta: PcapMeta,
    done: bool,
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut hdr = [0u8; GLOBAL_HEADER_LEN];
        let got = read_full(&mut inner, &mut hdr)?;
        if got < GLOBAL_HEADER_LEN {
            return Err(PcapError::Truncated {
                expected: GLOBAL_HEADER_LEN,
                available: got,
            });
        }
        let meta = parse_pcap_header(&hdr)?;
        Ok(PcapReader {
            inner,
            meta,
            done: false,
        })
    }

    pub fn meta(&self) -> &PcapMeta {
        &self.meta
    }

    pub fn next_packet(&mut self) -> Result<Option<RawPacket>, PcapError> {
        if self.done {
            return Ok(None);
        }
        let res = next_packet(&mut self.inner, &self.meta);
        if !matches!(res, Ok(Some(_))) {
            self.done = true;
        }
        res
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<RawPacket, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

pub struct PcapWriter<W> {
    inner: W,
    meta: PcapMeta,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut inner: W, meta: PcapMeta) -> Result<Self, PcapError> {
        inner.write_all(&meta.to_bytes())?;
        Ok(PcapWriter { inner, meta })
    }

    /// Write one record. The packet's `ts_frac` is written as-is, so its
    /// resolution should match the file's.
    pub fn write_packet(&mut self, pkt: &RawPacket) -> Result<(), PcapError> {
        if pkt.captured_len > self.meta.snaplen {
            return Err(PcapError::CorruptHeader {
                captured_len: pkt.captured_len,
                snaplen: self.meta.snaplen,
            });
        }
        if pkt.captured_len > pkt.original_len {
            return Err(PcapError::CapturedExceedsOriginal {
                captured_len: pkt.captured_len,
                original_len: pkt.original_len,
            });
        }
        debug_assert_eq!(pkt.data.len(), pkt.captured_len as usize);
        let o = self.meta.byte_order;
        let mut hdr = [0u8; RECORD_HEADER_LEN];
        hdr[0..4].copy_from_slice(&o.put_u32(pkt.ts_sec));
        hdr[4..8].copy_from_slice(&o.put_u32(pkt.ts_frac));
        hdr[8..12].copy_from_slice(&o.put_u32(pkt.captured_len));
        hdr[12..16].copy_from_slice(&o.put_u32(pkt.original_len));
        self.inner.write_all(&hdr)?;
        self.inner.write_all(&pkt.data)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Serialize a whole capture to bytes.
pub fn write_pcap(meta: PcapMeta, packets: &[RawPacket]) -> Result<Vec<u8>, PcapError> {
    let mut w = PcapWriter::new(Vec::new(), meta)?;
    for p in packets {
        w.write_packet(p)?;
    }
    Ok(w.into_inner())
}

/// Parse a whole in-memory capture.
pub fn read_pcap(bytes: &[u8]) -> Result<(PcapMeta, Vec<RawPacket>), PcapError> {
    let mut reader = PcapReader::new(bytes)?;
    let mut out = Vec::new();
    while let Some(p) = reader.next_packet()? {
        out.push(p);
    }
    Ok((*reader.meta(), out))
}
