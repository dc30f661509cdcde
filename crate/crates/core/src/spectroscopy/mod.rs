//! Chevron spectroscopy, damped-oscillation fits, resonance extraction and leakage spectra.

mod chevron;
mod fit;
mod leakage;
mod resonance;

pub use chevron::{
    chevron_scan, default_omega_grid, default_time_grid, linspace, refine_minimum, resonance_profile, ChevronData,
    ProfilePoint, Readout, ResonanceProfile, ScanOptions,
};
pub(crate) use chevron::Frame;
pub use fit::{fit_damped_oscillation, spectral_peak, OscillationFit, SpectralPeak};
pub use leakage::{leakage_spectrum, write_leakage_csv, LeakageLine};
pub use resonance::{gate_labels, locate_resonance, predicted_resonance, static_resonance, ResonanceSearch, SearchGrid};
