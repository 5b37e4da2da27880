//! Annotation-study web service and a client for remote bias scorers.
//!
//! Routes: `GET /api/tasks/next`, `POST /api/judgments`, `GET /api/metrics`,
//! `GET /api/health`, and an optional static UI bundle at `/`.

pub mod error;
pub mod http;
pub mod scorer;
pub mod session;

pub use error::{Result, ServiceError};
pub use http::{router, serve, ServeConfig, Server};
pub use scorer::{external_score, ExternalScorer, ExternalScorerConfig, FallbackPolicy};
pub use session::{Health, Session};
