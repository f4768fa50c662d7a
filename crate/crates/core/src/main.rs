use clap::Parser;

fn main() {
    let cli = cofe::cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr();
    if let Err(e) = cofe::cli::run(cli, &mut stdout, &mut stderr) {
        eprintln!("error: {e}");
        std::process::exit(cofe::cli::exit_code(&e));
    }
}
