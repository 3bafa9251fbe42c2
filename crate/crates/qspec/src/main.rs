fn main() {
    std::process::exit(qspec::cli::run_command(std::env::args().skip(1)));
}
