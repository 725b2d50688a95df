fn main() {
    std::process::exit(sloclab_cli::run(std::env::args_os()));
}
