fn main() {
    std::process::exit(absorb_sim::cli::main_with_args(std::env::args_os()));
}
