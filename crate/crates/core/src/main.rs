fn main() {
    let stdout = &mut std::io::stdout();
    let stderr = &mut std::io::stderr();
    std::process::exit(crowdcand::cli::run(std::env::args_os(), stdout, stderr));
}
