fn main() {
    std::process::exit(momo::cli::run());
}
