fn main() {
    std::process::exit(infinity_kkt::cli::main_from(std::env::args_os()));
}
