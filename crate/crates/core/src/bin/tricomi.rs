fn main() {
    let code = tricomi_lab::cli::run(std::env::args_os(), &mut std::io::stdout());
    std::process::exit(code);
}
