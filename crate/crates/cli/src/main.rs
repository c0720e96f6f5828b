use clap::Parser;

fn main() {
    let cli = jetode::Cli::parse();
    std::process::exit(jetode::run(cli.command));
}
