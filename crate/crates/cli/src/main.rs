fn main() {
    std::process::exit(qie_cli::run(std::env::args_os()));
}
