fn main() {
    std::process::exit(sofos::cli::main_with(std::env::args_os()));
}
