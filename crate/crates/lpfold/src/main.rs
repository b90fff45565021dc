fn main() {
    std::process::exit(lpfold::cli::run());
}
