//! Grammar-driven quantum classification of musical snippets.

pub mod corpus;
pub mod diagram;
pub mod grammar;
pub mod circuit;
pub mod sim;
pub mod semantics;
pub mod learn;
pub mod model;
pub mod composer;
pub mod midi;
pub mod cli;
