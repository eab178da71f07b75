fn main() {
    std::process::exit(intersectional::cli::main(std::env::args_os()));
}
