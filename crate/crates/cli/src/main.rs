use clap::Parser;

fn main() {
    let cli = scribble_cli::Cli::parse();
    std::process::exit(scribble_cli::run(cli));
}
