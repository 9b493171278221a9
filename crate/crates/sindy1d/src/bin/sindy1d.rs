use clap::Parser;

fn main() {
    let cli = sindy1d::cli::Cli::parse();
    std::process::exit(sindy1d::cli::main_with(cli));
}
