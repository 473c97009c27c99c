fn main() {
    std::process::exit(pimc_cli::app::main_with(std::env::args_os()));
}
