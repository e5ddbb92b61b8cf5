use clap::Parser;

fn main() -> std::process::ExitCode {
    match mwsn_marl::cli::run(mwsn_marl::cli::Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
