fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(itsa_cli::run(&argv));
}
