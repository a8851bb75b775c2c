fn main() {
    std::process::exit(ifa_lab::cli::dispatch(std::env::args()));
}
