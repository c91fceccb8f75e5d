fn main() {
    std::process::exit(sldkit::cli::run(std::env::args_os()));
}
