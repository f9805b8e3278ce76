//! Regenerate the committed toy models in `fixtures/`.
//!
//!     cargo run --example build_fixtures

use vinevi::nn::{save_model, zoo};

fn main() {
    for name in zoo::NAMES {
        let model = zoo::build(name).unwrap();
        let path = zoo::fixture_path(name);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_model(&model, &path).unwrap();
        println!(
            "{:<14} {:>8} params {:>12} flops  {}",
            name,
            model.param_count(),
            model.flops_total(),
            path.display()
        );
    }
}
