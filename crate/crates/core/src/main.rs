fn main() {
    std::process::exit(dora_explorer::cli::main());
}
