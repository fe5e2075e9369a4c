//! Regenerates the shipped profile fixtures under `data/fixtures/`.
//!
//! `cargo run -p pvfair --example gen_fixtures -- [data-dir]`

use std::path::PathBuf;

use pvfair::scenario::{synth_profiles, write_profiles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    // one clear day; the same triple is replayed every day
    let day = synth_profiles(1, 1, 0.0).remove(0);
    let manifest = write_profiles(&day, &data.join("fixtures/deterministic"))?;
    println!("wrote {}", manifest.display());
    Ok(())
}
