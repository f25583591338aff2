fn main() {
    std::process::exit(spectral_wick::cli::run(std::env::args_os()));
}
