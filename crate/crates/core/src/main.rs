fn main() {
    std::process::exit(free_corona::cli::run(std::env::args_os()));
}
