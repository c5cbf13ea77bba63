use clap::Parser;

fn main() {
    let cli = clusterdyn::cli::Cli::parse();
    std::process::exit(clusterdyn::cli::run(cli));
}
