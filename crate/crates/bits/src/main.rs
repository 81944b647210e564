fn main() {
    std::process::exit(bits::cli::run(std::env::args_os()));
}
