//! File formats, parallel training drivers and the `sphrase` command line
//! built on top of [`sphrase_core`].

pub mod cli;
pub mod formats;
pub mod manifest;
pub mod parallel;
pub mod report;

pub use formats::FormatError;
