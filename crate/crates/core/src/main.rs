fn main() {
    let code = dyadic_lab::cli::run_from(std::env::args(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
