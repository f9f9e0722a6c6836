//! HTTP API and command-line front end for `hapass-core`.

pub mod api;
pub mod cli;
