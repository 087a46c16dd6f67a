fn main() {
    std::process::exit(polypscope::cli::run(std::env::args_os()));
}
