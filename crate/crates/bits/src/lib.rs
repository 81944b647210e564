//! File formats, scorer transports and the command-line pipeline of the
//! `bits` audit toolkit. The algorithms live in `bits_core`.

pub mod backend;
pub mod cache;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod emit;
pub mod pipeline;
pub mod score;

pub use bits_core as core;
