fn main() {
    std::process::exit(apnet::cli::cli_main(std::env::args_os()));
}
