//! Annotation session service.
//!
//! Each session holds an editable yarn grid and crossing set for one fabric
//! image. Edits carry the revision they were made against and are refused
//! when it is stale. Every applied edit is journaled to disk before the new
//! state is returned.

pub mod http;
pub mod state;
pub mod store;

pub use http::{router, serve};
pub use state::{AnnotationState, Edit};
pub use store::{ExportedFiles, ServiceConfig, SessionStore};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    UnknownSession(String),
    #[error("no image {0}")]
    UnknownImage(String),
    #[error("stale revision {base}; current revision is {current}")]
    Conflict { base: u64, current: u64 },
    #[error("edit rejected: {0}")]
    Rejected(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Core(#[from] weftcodec::Error),
    #[error("worker task failed: {0}")]
    Task(String),
}
