//! Construction-grammar processing: slot-constraint matching, conditional
//! max-coverage selection, a relational hypergraph attention encoder and
//! typed construction networks.

pub mod cli;
pub mod constructicon;
pub mod error;
pub mod grammar;
pub mod hypergraph;
pub mod matcher;
pub mod rhgat;
pub mod selector;

pub use error::{Error, Result};
