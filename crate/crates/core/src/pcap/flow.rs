use super::{RawPacket, LINKTYPE_ETHERNET, LINKTYPE_RAW};

pub const IPPROTO_TCP: u8 = 6;
pub const IPPROTO_UDP: u8 = 17;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88a8;

/// Transport protocol and ports of a packet.
///
/// Ports are only present for TCP and UDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowKey {
    pub ip_proto: u8,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
}

impl FlowKey {
    pub fn ports(&self) -> impl Iterator<Item = u16> {
        self.src_port.into_iter().chain(self.dst_port)
    }
}

/// Extract protocol and ports. `None` for non-IP, unsupported link types,
/// and packets too short to hold the headers they announce.
pub fn extract_flow_key(pkt: &RawPacket, link_type: u32) -> Option<FlowKey> {
    let data = &pkt.data[..];
    match link_type {
        LINKTYPE_ETHERNET => ethernet(data),
        LINKTYPE_RAW => match data.first()? >> 4 {
            4 => ipv4(data),
            6 => ipv6(data),
            _ => None,
        },
        _ => None,
    }
}

fn be16(data: &[u8], at: usize) -> Option<u16> {
    Some(u16::from_be_bytes([*data.get(at)?, *data.get(at + 1)?]))
}

fn ethernet(data: &[u8]) -> Option<FlowKey> {
    let mut offset = 12;
    let mut ethertype = be16(data, offset)?;
    // up to two stacked VLAN tags
    for _ in 0..2 {
        if ethertype != ETHERTYPE_VLAN && ethertype != ETHERTYPE_QINQ {
            break;
        }
        offset += 4;
        ethertype = be16(data, offset)?;
    }
    let payload = data.get(offset + 2..)?;
    match ethertype {
        ETHERTYPE_IPV4 => ipv4(payload),
        ETHERTYPE_IPV6 => ipv6(payload),
        _ => None,
    }
}

fn ipv4(data: &[u8]) -> Option<FlowKey> {
    let first = *data.first()?;
    if first >> 4 != 4 {
        return None;
    }
    let ihl = usize::from(first & 0x0f) * 4;
    if ihl < 20 || data.len() < ihl {
        return None;
    }
    let proto = data[9];
    let frag_offset = be16(data, 6)? & 0x1fff;
    if frag_offset != 0 {
        // non-first fragment: no transport header
        return Some(FlowKey {
            ip_proto: proto,
            src_port: None,
            dst_port: None,
        });
    }
    transport(proto, &data[ihl..])
}

fn ipv6(data: &[u8]) -> Option<FlowKey> {
    if data.len() < 40 || data[0] >> 4 != 6 {
        return None;
    }
    let mut next = data[6];
    let mut rest = &data[40..];
    loop {
        match next {
            // hop-by-hop, routing, destination options
            0 | 43 | 60 => {
                let len = (usize::from(*rest.get(1)?) + 1) * 8;
                next = rest[0];
                rest = rest.get(len..)?;
            }
            // fragment header
            44 => {
                let frag_offset = be16(rest, 2)? >> 3;
                next = rest[0];
                rest = rest.get(8..)?;
                if frag_offset != 0 {
                    return Some(FlowKey {
                        ip_proto: next,
                        src_port: None,
                        dst_port: None,
                    });
                }
            }
            proto => return transport(proto, rest),
        }
    }
}

fn transport(proto: u8, data: &[u8]) -> Option<FlowKey> {
    match proto {
        IPPROTO_TCP | IPPROTO_UDP => {
            let min = if proto == IPPROTO_TCP { 20 } else { 8 };
            if data.len() < min {
                return None;
            }
            Some(FlowKey {
                ip_proto: proto,
                src_port: be16(data, 0),
                dst_port: be16(data, 2),
            })
        }
        other => Some(FlowKey {
            ip_proto: other,
            src_port: None,
            dst_port: None,
        }),
    }
}
