//! Turn packets into 224x224 images and write them as PPM.
//!
//!     cargo run --example packet_image -- [out_dir]

use vinevi::pcap::synth::{self, CLASS_PORTS};
use vinevi::vision::{packet_to_image, write_image, ImageFormat, TransformConfig, IMAGE_SIDE};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "packet-images".into());
    std::fs::create_dir_all(&out).unwrap();
    let cfg = TransformConfig::default();

    // four bytes fill the four quadrants
    let img = packet_to_image(&[0x00, 0x40, 0x80, 0xff], &cfg).unwrap();
    let h = IMAGE_SIDE / 2;
    println!(
        "quadrants: {} {} {} {}",
        img.pixel(0, 0, 0),
        img.pixel(0, h, 0),
        img.pixel(h, 0, 0),
        img.pixel(h, h, 0)
    );

    for (i, (class, transport, port)) in CLASS_PORTS.iter().enumerate() {
        let frame = synth::class_frame(*transport, *port, i as u32, 120);
        let img = packet_to_image(&frame, &cfg).unwrap();
        let path = format!("{out}/{class}.ppm");
        write_image(&img, &path, ImageFormat::Ppm).unwrap();
        println!("{class:<11} {:>4} bytes -> {path}", frame.len());
    }
}
