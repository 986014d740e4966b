fn main() {
    std::process::exit(mixreg_cli::run(std::env::args_os()));
}
