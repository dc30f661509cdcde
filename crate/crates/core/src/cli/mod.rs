//! Configuration and commands behind the `pgsim` binary.

mod commands;
mod config;

pub use commands::{provenance_header, resolve, run, VERSION};
pub use config::{
    leakage_labels, CalibrateConfig, ChevronConfig, Command, FidelityConfig, LeakageConfig, PulseConfig, RunConfig,
    StrengthsConfig,
};
