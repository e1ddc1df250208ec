fn main() {
    std::process::exit(htsne::cli_main(std::env::args_os()));
}
