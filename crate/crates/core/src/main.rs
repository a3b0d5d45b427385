fn main() {
    std::process::exit(semilinear::cli::main());
}
