fn main() {
    std::process::exit(sig2sig::cli::run(std::env::args_os()));
}
