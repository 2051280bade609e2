use clap::Parser;

fn main() {
    let cli = cgib::cli::Cli::parse();
    std::process::exit(cgib::cli::run(cli));
}
