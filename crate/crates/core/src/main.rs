fn main() {
    let code = vinevi::cli::execute(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
