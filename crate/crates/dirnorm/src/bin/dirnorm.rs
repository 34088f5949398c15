//! Command-line entry point for the verification suites.

fn main() {
    std::process::exit(dirnorm::driver::main_with_args(std::env::args_os()));
}
