use clap::Parser;

fn main() {
    let cli = match rvse::cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { rvse::cli::ExitStatus::Usage.code() } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let status = rvse::cli::execute(cli, &mut std::io::stdout());
    std::process::exit(status.code());
}
