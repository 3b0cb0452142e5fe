fn main() {
    std::process::exit(gsu::cli::cli_entry(std::env::args_os()));
}
