use clap::Parser;

fn main() -> std::process::ExitCode {
    farmgame::cli::main_with(farmgame::cli::Cli::parse())
}
