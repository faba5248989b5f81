//! Command line, HTTP service, run store and file export around `percept-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod export;
pub mod image;
pub mod jobs;
pub mod schema;
pub mod server;
pub mod store;

pub use error::{ErrorBody, Result, ServiceError};
