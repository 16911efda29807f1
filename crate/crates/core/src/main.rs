fn main() {
    std::process::exit(sllg::cli::run(std::env::args_os()));
}
