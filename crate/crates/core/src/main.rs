fn main() {
    std::process::exit(loopfield::cli::dispatch(std::env::args_os()));
}
