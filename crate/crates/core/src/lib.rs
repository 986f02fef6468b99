//! Node classification on text-attributed citation graphs.
//!
//! Per-node text and cached LLM outputs become four embedding sources
//! ([`features`]), which a learned attention layer mixes ([`fusion`]) into the
//! input of a graph transformer ([`model`]) running on ego subgraphs with
//! degree, shortest-path and path-edge encodings ([`structure`]).

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod graph;
pub mod model;
pub mod structure;
pub mod train;

pub use error::{Error, Result};
