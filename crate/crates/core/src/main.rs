fn main() {
    std::process::exit(multiverse::cli::main());
}
