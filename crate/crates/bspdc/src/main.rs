use clap::Parser;

fn main() {
    let cli = bspdc::cli::Cli::parse();
    if let Err(err) = bspdc::cli::run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
