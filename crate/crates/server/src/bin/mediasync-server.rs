use clap::Parser;
use mediasync_server::{serve, Config};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_target(false).init();
    serve(Config::parse()).await
}
