//! File formats, synthetic panels and the command-line front end for
//! [`lagcorr_core`].

#![forbid(unsafe_code)]

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod synth;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use io::{load_panel, write_panel, PanelFiles};
pub use synth::{generate_synthetic_panel, SynthConfig, SyntheticPanel, ValueSpec};
