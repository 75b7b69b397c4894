use clap::Parser;

fn main() {
    let cli = fae_core::cli::Cli::parse();
    if let Err(err) = fae_core::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
