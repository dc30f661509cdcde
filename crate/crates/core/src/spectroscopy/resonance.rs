//! Locating the gate resonance of the full circuit by chevron spectroscopy.

use serde::{Deserialize, Serialize};

use super::chevron::{chevron_scan, linspace, resonance_profile, ResonanceProfile, ScanOptions};
use crate::device::{DeviceSpec, FluxPulse};
use crate::effective::{dispersive_shift, gate_strength, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::{dressed_basis, HilbertConfig, LabeledBasis};

/// Prepared and tracked labels of the standard protocol: |100⟩ for iSWAP, |000⟩ → |110⟩ for bSWAP.
pub fn gate_labels(gate: Gate) -> (&'static str, &'static str) {
    match gate {
        Gate::Iswap => ("100", "100"),
        Gate::Bswap => ("000", "110"),
    }
}

/// Dressed transition frequency of the gate's active pair at static bias θ, GHz.
pub fn static_resonance(device: &DeviceSpec, hilbert: &HilbertConfig, theta: f64, gate: Gate) -> Result<f64> {
    let basis = LabeledBasis::new(hilbert);
    let db = dressed_basis(device, hilbert, theta)?;
    let e = |s: &str| basis.parse(s).map(|k| db.energies[k]);
    Ok(match gate {
        Gate::Iswap => (e("100")? - e("010")?).abs(),
        Gate::Bswap => e("110")? - e("000")?,
    })
}

/// Static dressed transition plus the modulation-induced (δ-dependent) part of the dispersive shift.
pub fn predicted_resonance(device: &DeviceSpec, hilbert: &HilbertConfig, theta: f64, delta: f64, gate: Gate) -> Result<f64> {
    let stat = static_resonance(device, hilbert, theta, gate)?;
    let ac = dispersive_shift(device, theta, delta, gate)?.omega_phi - dispersive_shift(device, theta, 0.0, gate)?.omega_phi;
    Ok(stat + ac)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceSearch {
    pub gate: Gate,
    pub delta: f64,
    /// Static dressed transition, GHz.
    pub static_resonance: f64,
    /// Starting guess: static transition plus the modulation-induced part of the dispersive shift.
    pub predicted: f64,
    pub profile: ResonanceProfile,
    /// Number of scans performed.
    pub scans: usize,
}

impl ResonanceSearch {
    pub fn omega_res(&self) -> f64 {
        self.profile.omega_res
    }

    /// Numerically extracted Ω_eff = f_min/4, GHz.
    pub fn strength(&self) -> f64 {
        self.profile.f_min / 4.0
    }
}

/// Scan geometry of the resonance search, relative to the predicted oscillation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchGrid {
    pub points: usize,
    /// Half-width of the ω_Φ window in units of the predicted oscillation frequency.
    pub half_width: f64,
    /// Resonant oscillation periods covered by the time grid (at least 2 µs).
    pub periods: f64,
    pub samples: usize,
    pub max_scans: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        SearchGrid { points: 17, half_width: 4.0, periods: 4.0, samples: 201, max_scans: 4 }
    }
}

impl SearchGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points < 5 {
            return Err(Error::invalid("search.points", "need at least 5 points"));
        }
        if !(self.half_width > 0.0 && self.periods >= 1.0) {
            return Err(Error::invalid("search", "half_width must be positive and periods at least 1"));
        }
        if self.samples < 8 || self.max_scans == 0 {
            return Err(Error::invalid("search", "need at least 8 samples and one scan"));
        }
        Ok(())
    }
}

/// Chevron scan around the predicted resonance, recentered until the minimum of the oscillation
/// frequency is interior. The window and time grid scale with the linear gate strength.
pub fn locate_resonance(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    template: &FluxPulse,
    gate: Gate,
    search: &SearchGrid,
    opts: &ScanOptions,
) -> Result<ResonanceSearch> {
    search.validate()?;
    let theta = template.theta;
    let delta = template.delta;
    if !(delta > 0.0) {
        return Err(Error::invalid("pulse.delta", "resonance search needs a nonzero modulation"));
    }
    let stat = static_resonance(device, hilbert, theta, gate)?;
    let predicted = predicted_resonance(device, hilbert, theta, delta, gate)?;
    let f_pred = 4.0 * gate_strength(device, theta, delta, gate)?.abs();
    let duration = (search.periods / f_pred).max(2000.0);
    let t_grid = linspace(0.0, duration, search.samples);
    let (initial, tracked) = gate_labels(gate);
    let mut center = predicted;
    let mut half = search.half_width * f_pred;
    let mut last_err = None;
    for scan in 1..=search.max_scans {
        let grid = linspace(center - half, center + half, search.points);
        let chev = chevron_scan(device, hilbert, &template.with_omega_phi(center), &grid, &t_grid, initial, tracked, opts)?;
        match resonance_profile(&chev) {
            Ok(profile) => {
                return Ok(ResonanceSearch { gate, delta, static_resonance: stat, predicted, profile, scans: scan });
            }
            Err(Error::NoResonance(msg)) => {
                // Move towards the lowest fitted frequency and widen.
                let best = chevron_lowest(&chev);
                if let Some(w) = best {
                    center = w;
                }
                half *= 2.0;
                last_err = Some(msg);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoResonance(format!(
        "{} resonance at delta = {delta} not bracketed after {} scans: {}",
        gate.name(),
        search.max_scans,
        last_err.unwrap_or_default()
    )))
}

fn chevron_lowest(chev: &super::chevron::ChevronData) -> Option<f64> {
    chev.omega_phi
        .iter()
        .zip(&chev.populations)
        .filter_map(|(&w, col)| super::fit::fit_damped_oscillation(&chev.times, col).ok().map(|f| (w, f.frequency)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(w, _)| w)
}
