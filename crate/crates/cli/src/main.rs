use clap::Parser;
use prosumer_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
        }
        Err(e) => {
            eprintln!("prosumer: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
