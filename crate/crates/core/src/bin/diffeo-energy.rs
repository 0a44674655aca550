fn main() {
    std::process::exit(diffeo_energy::cli::main_with_args(std::env::args_os()));
}
