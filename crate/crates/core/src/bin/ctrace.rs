fn main() {
    std::process::exit(conormal_trace::cli::run(std::env::args_os()));
}
