use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPEECHKG_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = speechkg_cli::Cli::parse();
    std::process::exit(speechkg_cli::run(cli));
}
