use clap::Parser;

fn main() {
    let cli = nrtwin::cli::Cli::parse();
    std::process::exit(nrtwin::cli::run(cli));
}
