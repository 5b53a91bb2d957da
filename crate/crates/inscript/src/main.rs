fn main() {
    std::process::exit(inscript::cli::run());
}
