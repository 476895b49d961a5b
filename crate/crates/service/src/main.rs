fn main() {
    std::process::exit(rsl_service::cli::run(std::env::args_os()));
}
