fn main() {
    std::process::exit(hypdich::cli::run(std::env::args_os()));
}
