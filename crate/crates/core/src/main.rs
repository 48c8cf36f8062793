fn main() {
    std::process::exit(pedet::cli::main());
}
