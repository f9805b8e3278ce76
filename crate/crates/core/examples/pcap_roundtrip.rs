//! Write a capture in every byte order and timestamp resolution, read it
//! back, and print the flow key of each packet.
//!
//!     cargo run --example pcap_roundtrip [-- existing.pcap]

use std::time::Duration;

use vinevi::pcap::{
    extract_flow_key, read_pcap, synth, write_pcap, ByteOrder, PcapMeta, PcapReader, TsResolution, LINKTYPE_ETHERNET,
};

fn main() {
    if let Some(path) = std::env::args().nth(1) {
        let reader = PcapReader::new(std::fs::File::open(&path).unwrap()).unwrap();
        let link = reader.meta().link_type;
        for (i, pkt) in reader.enumerate() {
            let pkt = pkt.unwrap();
            println!(
                "{i:>5} {:>12?} {:>5} bytes {:?}",
                pkt.timestamp(),
                pkt.captured_len,
                extract_flow_key(&pkt, link)
            );
        }
        return;
    }

    let frames = vec![
        synth::udp_ipv4(40000, 53, b"query"),
        synth::tcp_ipv4(50000, 22, b"SSH-2.0-OpenSSH_9.6"),
        synth::arp_request(),
    ];
    let packets = synth::stamp(
        frames,
        Duration::new(1_700_000_000, 123_456_789),
        Duration::from_millis(5),
    );

    for order in [ByteOrder::Little, ByteOrder::Big] {
        for res in [TsResolution::Micros, TsResolution::Nanos] {
            let meta = PcapMeta::new(order, res, 65535, LINKTYPE_ETHERNET);
            let bytes = write_pcap(meta, &packets).unwrap();
            let (back_meta, back) = read_pcap(&bytes).unwrap();
            assert_eq!(back_meta, meta);
            assert!(back.iter().zip(&packets).all(|(a, b)| a.data == b.data));
            println!("{order:?}/{res:?}: {} bytes, magic {:02x?}", bytes.len(), &bytes[..4]);
            for pkt in &back {
                println!("  {:?} {:?}", pkt.timestamp(), extract_flow_key(pkt, LINKTYPE_ETHERNET));
            }
        }
    }
}
