//! Experiment workbench: builds the surrogate database, runs optimizations
//! per reward weighting, validates incumbents on the real simulator, and
//! serves all of it over HTTP.

pub mod api;
pub mod config;
pub mod runner;
pub mod store;
pub mod validation;

use firesmac_core::mdp::MdpError;
use firesmac_core::smac::SmacError;
use firesmac_core::surrogate::SurrogateError;

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Smac(#[from] SmacError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("internal: {0}")]
    Internal(String),
}
