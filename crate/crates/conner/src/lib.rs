//! Runtime around `conner-core`: HTTP scoring client, response cache, mock
//! server, dataset and config files, and the evaluation pipeline.

pub mod cache;
pub mod client;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod routing;
pub mod server;

pub use error::{Error, Result};
