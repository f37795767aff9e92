fn main() {
    std::process::exit(qb_core::cli::run(std::env::args_os()));
}
