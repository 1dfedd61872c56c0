fn main() {
    let code = recession_cli::run(std::env::args_os(), |name| std::env::var(name).ok());
    std::process::exit(code);
}
