//! Code Change Trees: a tree-shaped representation of the difference between
//! the syntax trees of the before and after states of a function, together
//! with the flattening, embedding and evaluation pipeline used to compare it
//! against metric-based and whole-tree representations for just-in-time
//! vulnerability prediction.

pub mod ast;
pub mod change;
pub mod demo;
pub mod embed;
pub mod error;
pub mod eval;
pub mod features;
pub mod java;
pub mod synth;
pub mod tokens;

pub use error::{Error, Result};
