fn main() {
    let args = std::env::args_os().collect();
    let code = bgcusum::cli::run(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
