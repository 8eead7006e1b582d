//! HTTP and command-line surface of the historical geocoder: REST
//! geocoding, batch CSV, ruid-keyed result persistence and collaborative
//! edits stored as new gazetteer objects.

pub mod api;
pub mod batch_csv;
pub mod cli;
pub mod config;
pub mod engine;
pub mod http;
pub mod journal;

pub use engine::{EditRequest, Engine, EngineError, EngineOptions};
pub use http::{router, AppState, QueryDefaults};
