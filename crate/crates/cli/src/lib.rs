//! File formats and signal IO for the `detsft` command line tool.

pub mod artifact;
pub mod formats;
pub mod signal;
