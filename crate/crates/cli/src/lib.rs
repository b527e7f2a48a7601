//! Command-line orchestration, configuration and the HTTP prediction
//! service around `parkcast-core`.

pub mod buffer;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod forecast;
pub mod service;

pub use commands::run;
pub use error::{AppError, AppResult};
