fn main() {
    std::process::exit(bsemitoric::cli::run(std::env::args_os()));
}
