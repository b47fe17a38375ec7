use std::io::Write;
use std::process::ExitCode;

use chainstory_server::{bind, Config};
use clap::Parser;
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let config = Config::parse();
    let bound = match bind(&config).await {
        Ok(b) => b,
        Err(e) => {
            eprintln!("chainstory-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let addr = match bound.local_addr() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("chainstory-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let (images, chains, last_seq) = bound
        .state
        .store
        .read(|p| (p.chains().pool_size(), p.chains().chain_count(), p.last_seq()));
    tracing::info!(%addr, images, chains, last_seq, data_dir = %config.data_dir.display(), "state replayed");
    // launchers parse this line to find the bound port
    println!("listening on {addr}");
    let _ = std::io::stdout().flush();
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    match bound.run(shutdown).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chainstory-server: {e}");
            ExitCode::FAILURE
        }
    }
}
