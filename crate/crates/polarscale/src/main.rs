fn main() {
    std::process::exit(polarscale::cli::run(std::env::args_os()));
}
