//! Prints the built-in configuration as JSON. Used to regenerate
//! configs/default.json:
//!
//! cargo run --example dump_default_config > configs/default.json

fn main() {
    println!("{}", socsim::SocConfig::default().to_json());
}
