fn main() {
    std::process::exit(modtransit::cli::run(std::env::args_os()));
}
