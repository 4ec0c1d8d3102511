//! Remote scenario repository: versioned scenario storage, catalog, event
//! ingestion, dashboards and creator alarms over HTTP.
//!
//! ```no_run
//! # async fn demo() -> Result<(), Box<dyn std::error::Error>> {
//! use std::sync::Arc;
//! use rvse_core::analytics::DetectorConfig;
//! use rvse_repository::{router, AppState, Store, TokenTable};
//!
//! let state = AppState {
//!     store: Store::open("/srv/rvse", DetectorConfig::default())?,
//!     tokens: TokenTable::load("tokens.json".as_ref())?,
//!     log_requests: true,
//! };
//! let listener = tokio::net::TcpListener::bind("127.0.0.1:8080").await?;
//! axum::serve(listener, router(Arc::new(state))).await?;
//! # Ok(()) }
//! ```

mod api;
mod auth;
mod store;

pub use api::{router, ApiError, AppState, CHECKSUM_HEADER};
pub use auth::{Principal, Role, TokenFileError, TokenTable, DEFAULT_COHORT};
pub use store::{CatalogEntry, Store, StoreError, UploadReceipt};

/// Serves the API on an already-bound listener until the future is dropped
/// or the process ends.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(std::sync::Arc::new(state))).await
}
