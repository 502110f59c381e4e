fn main() {
    std::process::exit(motionsep::cli::main());
}
