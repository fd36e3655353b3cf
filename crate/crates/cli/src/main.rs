fn main() {
    std::process::exit(sdm_cli::run_cli(std::env::args_os()));
}
