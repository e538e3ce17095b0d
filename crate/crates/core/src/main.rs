fn main() {
    std::process::exit(transkit::cli::dispatch(std::env::args_os()));
}
