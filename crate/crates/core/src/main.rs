fn main() {
    std::process::exit(qdsred::cli::run(std::env::args_os()));
}
