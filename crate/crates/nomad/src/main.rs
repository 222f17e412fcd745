fn main() {
    std::process::exit(nomad::cli::run(std::env::args_os().collect()));
}
