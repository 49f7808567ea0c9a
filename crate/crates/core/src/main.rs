use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = mtp2::cli::Cli::parse();
    match mtp2::cli::run(cli) {
        Ok(out) => println!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(mtp2::cli::exit_code(&e));
        }
    }
}
