fn main() {
    std::process::exit(parakkt::cli::run(std::env::args_os()));
}
