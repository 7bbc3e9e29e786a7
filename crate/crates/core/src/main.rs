fn main() {
    std::process::exit(watchtower::cli::main());
}
