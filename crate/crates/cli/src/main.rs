//! `sheafgauge` binary.

fn main() {
    std::process::exit(sheafgauge_cli::main_with(std::env::args_os()));
}
