//! Retrospective board service: projects, boards, anonymous comment intake,
//! facilitator-triggered allocation, grouping, actions, ratings, dashboard
//! and sprint summaries, exposed over a JSON HTTP API.

pub mod error;
pub mod http;
pub mod service;
pub mod views;

use std::net::SocketAddr;
use std::sync::Arc;

pub use error::{ErrorBody, ServiceError};
pub use http::router;
pub use service::{AuditEvent, KanbanItemInput, ResolveTarget, RetroService};

/// Serves the API on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<RetroService>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    if let Some(addr) = addr {
        log::info!("listening on http://{addr}{}", http::API_PREFIX);
    }
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
