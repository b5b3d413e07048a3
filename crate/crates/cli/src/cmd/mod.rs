//! Subcommand implementations.
//!
//! Each module resolves its options through [`crate::config::Resolver`]
//! (flag > config file > default), runs the corresponding toolkit routine,
//! writes the run's artifacts under the output directory, and prints a
//! one-line summary.  Run records embed the fully-resolved configuration,
//! so an artifact always documents how it was produced.

pub mod cqed;
pub mod cv;
pub mod grape;
pub mod mirror;
pub mod track;
pub mod verify;
