use smt2parser::{concrete, CommandStream};
use std::fs::File;
use std::io::BufReader;

fn main() {
    let path = match std::env::args().nth(1) {
        Some(p) => p,
        None => {
            eprintln!("usage: smt2check FILE.smt2");
            std::process::exit(2);
        }
    };
    let file = File::open(&path).unwrap_or_else(|e| {
        eprintln!("smt2check: cannot open {}: {}", path, e);
        std::process::exit(2);
    });
    let stream = CommandStream::new(BufReader::new(file), concrete::SyntaxBuilder, Some(path));
    let mut count = 0usize;
    for command in stream {
        match command {
            Ok(_) => count += 1,
            Err(e) => {
                eprintln!("smt2check: parse error: {}", e);
                std::process::exit(1);
            }
        }
    }
    println!("ok {} commands", count);
}
