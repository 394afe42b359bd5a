fn main() {
    std::process::exit(rvae::cli::main());
}
