//! Synthetic Ethernet frames for fixtures, tests and demos.

use std::time::Duration;

use crate::classify::TrafficClass;

use super::{
    write_pcap, ByteOrder, PcapError, PcapMeta, RawPacket, TsResolution, IPPROTO_TCP, IPPROTO_UDP, LINKTYPE_ETHERNET,
};

const SRC_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x01];
const DST_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x02];

fn ethernet_header(ethertype: u16) -> Vec<u8> {
    let mut f = Vec::with_capacity(64);
    f.extend_from_slice(&DST_MAC);
    f.extend_from_slice(&SRC_MAC);
    f.extend_from_slice(&ethertype.to_be_bytes());
    f
}

fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum();
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn ipv4_header(proto: u8, payload_len: usize) -> [u8; 20] {
    let total = (20 + payload_len) as u16;
    let mut h = [0u8; 20];
    h[0] = 0x45;
    h[2..4].copy_from_slice(&total.to_be_bytes());
    h[6] = 0x40; // don't fragment
    h[8] = 64;
    h[9] = proto;
    h[12..16].copy_from_slice(&[192, 168, 1, 10]);
    h[16..20].copy_from_slice(&[192, 168, 1, 20]);
    let csum = ipv4_checksum(&h);
    h[10..12].copy_from_slice(&csum.to_be_bytes());
    h
}

/// Ethernet + IPv4 + UDP frame.
pub fn udp_ipv4(src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    let udp_len = 8 + payload.len();
    let mut f = ethernet_header(0x0800);
    f.extend_from_slice(&ipv4_header(IPPROTO_UDP, udp_len));
    f.extend_from_slice(&src_port.to_be_bytes());
    f.extend_from_slice(&dst_port.to_be_bytes());
    f.extend_from_slice(&(udp_len as u16).to_be_bytes());
    f.extend_from_slice(&[0, 0]);
    f.extend_from_slice(payload);
    f
}

/// Ethernet + IPv4 + TCP frame with a 20-byte TCP header (ACK|PSH).
pub fn tcp_ipv4(src_port: u16, dst_port: u16, payload: &[u8]) -> Vec<u8> {
    let mut f = ethernet_header(0x0800);
    f.extend_from_slice(&ipv4_header(IPPROTO_TCP, 20 + payload.len()));
    f.extend_from_slice(&src_port.to_be_bytes());
    f.extend_from_slice(&dst_port.to_be_bytes());
    f.extend_from_slice(&1u32.to_be_bytes()); // seq
    f.extend_from_slice(&1u32.to_be_bytes()); // ack
    f.extend_from_slice(&[0x50, 0x18]); // data offset 5, ACK|PSH
    f.extend_from_slice(&0xffffu16.to_be_bytes());
    f.extend_from_slice(&[0, 0, 0, 0]);
    f.extend_from_slice(payload);
    f
}

/// Ethernet + ARP request.
pub fn arp_request() -> Vec<u8> {
    let mut f = ethernet_header(0x0806);
    f.extend_from_slice(&[0x00, 0x01, 0x08, 0x00, 6, 4, 0x00, 0x01]);
    f.extend_from_slice(&SRC_MAC);
    f.extend_from_slice(&[192, 168, 1, 10]);
    f.extend_from_slice(&[0; 6]);
    f.extend_from_slice(&[192, 168, 1, 20]);
    f
}

/// Transport used by [`class_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    Tcp,
    Udp,
}

/// A frame carrying `port` as destination, sent from an ephemeral source port
/// (49152 and up) that no class rule matches.
pub fn class_frame(transport: Transport, port: u16, seq: u32, payload_len: usize) -> Vec<u8> {
    let src = 49152 + (seq % 16000) as u16;
    let payload: Vec<u8> = (0..payload_len).map(|i| (i as u32 ^ seq) as u8).collect();
    match transport {
        Transport::Tcp => tcp_ipv4(src, port, &payload),
        Transport::Udp => udp_ipv4(src, port, &payload),
    }
}

/// One class-defining destination port per traffic class.
pub const CLASS_PORTS: [(TrafficClass, Transport, u16); TrafficClass::COUNT] = [
    (TrafficClass::Bittorrent, Transport::Tcp, 6881),
    (TrafficClass::Browsing, Transport::Tcp, 443),
    (TrafficClass::Dns, Transport::Udp, 53),
    (TrafficClass::Iot, Transport::Tcp, 1883),
    (TrafficClass::Rdp, Transport::Tcp, 3389),
    (TrafficClass::Ssh, Transport::Tcp, 22),
    (TrafficClass::Voip, Transport::Udp, 5060),
];

/// `n` frames cycling through [`CLASS_PORTS`], with payload lengths varying
/// from 0 to 199 bytes. Returns each frame's intended class alongside it.
pub fn mixed_frames(n: usize) -> Vec<(TrafficClass, Vec<u8>)> {
    (0..n)
        .map(|i| {
            let (class, transport, port) = CLASS_PORTS[i % CLASS_PORTS.len()];
            (class, class_frame(transport, port, i as u32, (i * 37) % 200))
        })
        .collect()
}

/// Packets `frames[i]` stamped `start + i * spacing`.
pub fn stamp(frames: Vec<Vec<u8>>, start: Duration, spacing: Duration) -> Vec<RawPacket> {
    frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| RawPacket::new(start + spacing * i as u32, f))
        .collect()
}

/// Ethernet microsecond little-endian capture of `packets`.
pub fn ethernet_capture(packets: &[RawPacket]) -> Result<Vec<u8>, PcapError> {
    let meta = PcapMeta::new(ByteOrder::Little, TsResolution::Micros, 65535, LINKTYPE_ETHERNET);
    write_pcap(meta, packets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcap::extract_flow_key;

    #[test]
    fn checksum_verifies() {
        let h = ipv4_header(IPPROTO_UDP, 12);
        assert_eq!(ipv4_checksum(&h), 0);
    }

    #[test]
    fn builders_decode() {
        let udp = RawPacket::new(Duration::ZERO, udp_ipv4(1234, 53, b"q"));
        let k = extract_flow_key(&udp, LINKTYPE_ETHERNET).unwrap();
        assert_eq!((k.ip_proto, k.src_port, k.dst_port), (17, Some(1234), Some(53)));

        let tcp = RawPacket::new(Duration::ZERO, tcp_ipv4(22, 4000, &[]));
        let k = extract_flow_key(&tcp, LINKTYPE_ETHERNET).unwrap();
        assert_eq!((k.ip_proto, k.src_port, k.dst_port), (6, Some(22), Some(4000)));

        let arp = RawPacket::new(Duration::ZERO, arp_request());
        assert_eq!(extract_flow_key(&arp, LINKTYPE_ETHERNET), None);
    }
}
