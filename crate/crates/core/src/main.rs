use clap::Parser;

fn main() {
    let cli = lvdro::cli::Cli::parse();
    if let Err(e) = lvdro::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
