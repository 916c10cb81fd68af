use clap::Parser;

fn main() {
    let cli = chainrec::cli::Cli::parse();
    std::process::exit(chainrec::cli::run(&cli));
}
