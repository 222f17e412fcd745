//! Writes a directory of synthetic speech-like utterances.
//!
//! `cargo run --example make_corpus -- <dir> [count] [seconds] [seed]`

use std::path::PathBuf;

fn main() -> nomad::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(dir) = args.first() else {
        eprintln!("usage: make_corpus <dir> [count] [seconds] [seed]");
        std::process::exit(1);
    };
    let arg = |i: usize, default: &str| args.get(i).map_or(default.to_string(), Clone::clone);
    let count: usize = arg(1, "20").parse().expect("count");
    let seconds: f64 = arg(2, "3").parse().expect("seconds");
    let seed: u64 = arg(3, "0").parse().expect("seed");
    let files = nomad::corpus::write_corpus(&PathBuf::from(dir), "utt", count, seconds, seed)?;
    println!("wrote {} files to {dir}", files.len());
    Ok(())
}
