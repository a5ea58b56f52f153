//! Command-line front end and HTTP session service for the benchmark:
//! test-set generation, suite runs, offline scoring, report tables, a
//! stateful session server, and a service-backed episode driver that mirrors
//! the in-process runner.

pub mod client;
pub mod manifest;
pub mod mockchat;
pub mod report;
pub mod score;
pub mod service;
