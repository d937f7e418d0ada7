fn main() {
    std::process::exit(mdtk_cli::main_with_args(std::env::args().collect()));
}
