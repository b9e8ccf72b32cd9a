fn main() {
    std::process::exit(cutproj::cli::run(std::env::args_os()));
}
