use clap::Parser;

fn main() {
    // clap exits with status 2 on bad flags.
    let cli = chainopt::cli::Cli::parse();
    if let Err(e) = chainopt::cli::run(&cli) {
        eprintln!("chainopt: {e}");
        std::process::exit(e.exit_code());
    }
}
