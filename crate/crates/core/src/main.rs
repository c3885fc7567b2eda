fn main() {
    std::process::exit(clocksim::cli::run(std::env::args_os()));
}
