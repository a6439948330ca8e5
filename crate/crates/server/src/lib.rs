//! HTTP service and batch helpers around `xa11y-core`.

pub mod api;
pub mod error;
pub mod store;

pub use api::{router, AppState};
pub use error::{ApiError, ErrorCode};
pub use store::{replay, Store};
