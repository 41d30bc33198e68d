use clap::Parser;
use qsdc_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("qsdc: {e}");
        std::process::exit(e.exit_code());
    }
}
