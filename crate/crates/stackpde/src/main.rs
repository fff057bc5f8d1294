use clap::Parser;

fn main() {
    let cli = stackpde::cli::Cli::parse();
    std::process::exit(stackpde::cli::run(cli));
}
