//! Maximum hands-off control of discrete-time switched linear systems.
//!
//! The pipeline partitions the state space into sign-pattern regions
//! ([`abstraction`]), builds a labelled transition graph over them
//! ([`graph`]), searches it for a sparsest walk into the origin ([`walk`]),
//! and turns that walk into a concrete hybrid control sequence
//! ([`controller`]). [`oracle`] solves small instances exactly by enumeration.

pub mod abstraction;
pub mod config;
pub mod controller;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod oracle;
pub mod pattern;
pub mod report;
pub mod system;
pub mod walk;

pub use error::{Error, Result};
