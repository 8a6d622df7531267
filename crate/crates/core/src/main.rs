fn main() {
    std::process::exit(frontier_sfa::cli::run(std::env::args_os()));
}
