fn main() {
    std::process::exit(geotx::cli::run(std::env::args_os()));
}
