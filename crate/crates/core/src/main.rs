fn main() {
    std::process::exit(edgeheal::cli::run());
}
