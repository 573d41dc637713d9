fn main() {
    std::process::exit(phenofront::cli::main_with_args(std::env::args_os()));
}
