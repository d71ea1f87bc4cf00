use clap::Parser;

fn main() {
    let cli = spde_cli::Cli::parse();
    std::process::exit(spde_cli::run(cli));
}
