//! `acpkan` command-line entry point.

fn main() {
    std::process::exit(acpkan::cli::main_with_args(std::env::args_os()));
}
