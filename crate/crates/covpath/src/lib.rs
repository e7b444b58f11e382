//! File formats, the `covpath` command line and rayon drivers on top of
//! [`covpath_core`].

pub mod cli;
pub mod ellipse;
pub mod error;
pub mod io;
pub mod parallel;

pub use covpath_core as core;
pub use error::CliError;
