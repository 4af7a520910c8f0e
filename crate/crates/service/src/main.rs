use anyhow::{Context, Result};
use clap::Parser;
use qpress_service::{Config, Service};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qpress-service", version, about = "HTTP job service for target-quality compression")]
struct Args {
    /// Directory for stored images, blobs and jobs.log.
    #[arg(long, default_value = "qpress-data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Concurrent jobs; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
}

#[tokio::main]
async fn main() -> Result<()> {
    let args = Args::parse();
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let service = Service::open(&Config {
        data_dir: args.data_dir.clone(),
        workers,
    })
    .with_context(|| format!("cannot open {}", args.data_dir.display()))?;
    let listener = tokio::net::TcpListener::bind(&args.addr)
        .await
        .with_context(|| format!("cannot bind {}", args.addr))?;
    eprintln!("listening on {} with {workers} workers", listener.local_addr()?);
    axum::serve(listener, service.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
