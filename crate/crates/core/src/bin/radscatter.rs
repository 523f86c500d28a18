fn main() {
    std::process::exit(radscatter::cli_io::run(std::env::args_os()));
}
