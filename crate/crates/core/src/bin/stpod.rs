fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(stpod_core::cli::main_with_args(&args));
}
