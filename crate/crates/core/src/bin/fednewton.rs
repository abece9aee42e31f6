fn main() {
    std::process::exit(fednewton::harness::cli::main());
}
