fn main() {
    std::process::exit(sdohkit::cli::run(std::env::args().skip(1)));
}
