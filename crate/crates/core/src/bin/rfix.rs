fn main() {
    std::process::exit(rfix_core::cli::run(std::env::args_os()));
}
