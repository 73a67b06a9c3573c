fn main() {
    std::process::exit(nameorigin_cli::run(std::env::args_os()));
}
