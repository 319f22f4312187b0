fn main() {
    std::process::exit(multisearch_cli::run_command(std::env::args_os()));
}
