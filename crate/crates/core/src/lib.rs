//! Dominated-splitting diagnostics for linear cocycles over subshifts of
//! finite type: periodic data, Gelfand-number profiles, Lyapunov spectra,
//! domination certificates and hyperbolicity classification.

pub mod certifier;
pub mod cocycle;
pub mod config;
pub mod error;
pub mod linalg;
pub mod lyapunov;
pub mod periodic;
pub mod report;
pub mod run;
pub mod sft;
pub mod snumbers;

pub use error::{Error, Result};

/// Configuration, report and CSV reference printed by `domsplit schema`.
pub const SCHEMA: &str = include_str!("schema.json");
