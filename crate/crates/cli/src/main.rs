fn main() {
    std::process::exit(fracfp_cli::main_with(std::env::args()));
}
