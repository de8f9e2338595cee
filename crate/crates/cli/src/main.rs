fn main() {
    std::process::exit(tcf_cli::cli_main(std::env::args_os()));
}
