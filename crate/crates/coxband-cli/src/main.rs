fn main() {
    std::process::exit(coxband_cli::cli_main(std::env::args_os()));
}
