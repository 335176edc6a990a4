fn main() {
    std::process::exit(memkernel::cli::run());
}
