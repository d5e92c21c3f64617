fn main() {
    std::process::exit(nlhawkes_cli::main_with_args(std::env::args_os()));
}
