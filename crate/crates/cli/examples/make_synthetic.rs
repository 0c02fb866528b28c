//! Regenerate `data/synthetic`: `cargo run -p powerlap-cli --example make_synthetic [dir]`.

use powerlap_cli::synthetic;

fn main() {
    let dir = std::env::args_os()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(synthetic::bundled_dir);
    match synthetic::write(&dir, synthetic::SEED) {
        Ok(paths) => paths.iter().for_each(|p| println!("{}", p.display())),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
