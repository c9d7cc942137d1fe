//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod gan;
pub mod oracles;
