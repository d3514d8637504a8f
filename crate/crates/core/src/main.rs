fn main() {
    std::process::exit(scriptevo::cli::run(std::env::args_os()));
}
