//! Exact simulation and information accounting for multi-party protocols in
//! the asynchronous number-in-hand peer-to-peer model.

pub mod bits;
pub mod cli;
pub mod compression;
pub mod info;
pub mod measures;
pub mod model;
pub mod zoo;
