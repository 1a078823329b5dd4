//! Service and command-line front ends over `atelier-core`.
//!
//! [`engine::Engine`] owns the store and implements every operation once;
//! [`http`] and [`cli`] only translate requests and responses.

pub mod cli;
pub mod engine;
pub mod error;
pub mod http;

pub use engine::Engine;
pub use error::ApiError;
