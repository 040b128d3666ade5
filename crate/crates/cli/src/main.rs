use clap::Parser;

fn main() {
    let cli = sdoh_cli::Cli::parse();
    if let Err(e) = sdoh_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
