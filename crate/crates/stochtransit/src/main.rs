fn main() {
    std::process::exit(stochtransit::cli::run(std::env::args_os()));
}
