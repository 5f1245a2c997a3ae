use std::net::SocketAddr;

use anyhow::Context;
use clap::Parser;
use convicta::catalog::ScenarioCatalog;
use convicta::server::{serve, AppState, DEFAULT_OUTBOX_CAPACITY};

/// Serve interactive simulation sessions over HTTP and WebSocket.
#[derive(Debug, Parser)]
#[command(name = "convicta-server", version)]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "CONVICTA_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Frames buffered per client before state frames are dropped.
    #[arg(long, default_value_t = DEFAULT_OUTBOX_CAPACITY)]
    outbox: usize,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .with_context(|| format!("cannot listen on {}", args.listen))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    let app = AppState::with_capacity(ScenarioCatalog::from_env(), args.outbox);
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    serve(listener, app, shutdown).await?;
    Ok(())
}
