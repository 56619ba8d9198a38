//! File formats, output plumbing and the `lhv` command line for
//! [`kaon_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod events;
pub mod output;

pub use commands::{run, Cli};
