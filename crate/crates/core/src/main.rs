fn main() {
    std::process::exit(kerrsim::runner::main_with_args(std::env::args_os()));
}
