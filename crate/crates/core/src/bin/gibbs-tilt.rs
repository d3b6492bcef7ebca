fn main() {
    std::process::exit(gibbs_tilt::cli::run(std::env::args_os()));
}
