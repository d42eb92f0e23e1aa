//! File formats, pipelines and the HTTP service around `prediag-core`.

pub mod config;
pub mod container;
pub mod corpus;
pub mod error;
pub mod manifest;
pub mod model;
pub mod rules;
pub mod scripts;
pub mod service;
pub mod store;

pub use error::{Error, Result};
