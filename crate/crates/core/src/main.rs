fn main() {
    std::process::exit(torus_minimax::cli::main_entry());
}
