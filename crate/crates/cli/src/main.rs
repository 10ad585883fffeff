use clap::Parser;
use omegaz_cli::{error_record, execute, exit_code, ExperimentConfig, EXIT_CONFIG, EXIT_OK};

fn main() {
    let config = match ExperimentConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(EXIT_OK);
            }
            eprintln!("{}", error_record("config", e.to_string().trim()));
            std::process::exit(EXIT_CONFIG);
        }
    };
    if let Err(e) = execute(&config) {
        eprintln!("{}", error_record(e.kind(), &e.to_string()));
        std::process::exit(exit_code(&e));
    }
}
