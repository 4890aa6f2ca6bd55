fn main() {
    std::process::exit(simals::cli::run(std::env::args_os()));
}
