fn main() {
    std::process::exit(tactile_ism::cli::run(std::env::args_os()));
}
