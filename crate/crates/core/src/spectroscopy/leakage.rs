//! Leakage out of a driven two-state subspace as a function of the drive frequency.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::chevron::{check_omega_grid, propagation_grid, scan_pulse, Frame, ScanOptions};
use super::fit::spectral_peak;
use crate::device::{DeviceSpec, FluxPulse};
use crate::dynamics::propagate_schrodinger;
use crate::error::{Error, Result};
use crate::hamiltonian::{label_string, HilbertConfig};

/// One leaking basis state at one drive frequency.
#[derive(Debug, Clone, Serialize)]
pub struct LeakageLine {
    pub omega_phi: f64,
    /// Dominant oscillation frequency of the leaking population, GHz. None when the
    /// population shows no resolvable line (e.g. a monotonic drift).
    pub frequency: Option<f64>,
    /// Maximum over time of this state's population.
    pub population: f64,
    /// Maximum over time of the total population outside the subspace.
    pub max_leakage: f64,
    pub label: String,
    pub coupler_excited: bool,
}

/// For every ω_Φ, propagates `initial` and records each basis state outside `subspace`
/// whose population exceeds `threshold` at some sample. Lines are ordered by ω_Φ, then by
/// decreasing population.
#[allow(clippy::too_many_arguments)]
pub fn leakage_spectrum(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    template: &FluxPulse,
    omega_grid: &[f64],
    t_grid: &[f64],
    initial: &str,
    subspace: &[&str],
    threshold: f64,
    opts: &ScanOptions,
) -> Result<Vec<LeakageLine>> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be positive"));
    }
    device.validate()?;
    check_omega_grid(omega_grid)?;
    let (grid, skip) = propagation_grid(t_grid)?;
    opts.propagation.validate()?;
    let frame = Frame::new(device, hilbert, template.theta, opts.readout)?;
    let i0 = frame.basis.parse(initial)?;
    let inside = subspace.iter().map(|l| frame.basis.parse(l)).collect::<Result<Vec<_>>>()?;
    if inside.is_empty() {
        return Err(Error::invalid("subspace", "must name at least one label"));
    }
    let outside: Vec<usize> = (0..frame.basis.dim()).filter(|k| !inside.contains(k)).collect();
    let psi0 = frame.state(i0);
    let t_last = *grid.last().unwrap();
    for &w in omega_grid {
        scan_pulse(template, w, t_last).validate()?;
    }
    let times = &grid[skip..];
    let per_column = omega_grid
        .par_iter()
        .map(|&w| -> Result<Vec<LeakageLine>> {
            let pulse = scan_pulse(template, w, t_last);
            let ham = crate::hamiltonian::circuit_hamiltonian(device, hilbert, &pulse, opts.transfer)?;
            let traj = propagate_schrodinger(&ham, &psi0, &grid, &opts.propagation)?;
            let series: Vec<Vec<f64>> =
                outside.iter().map(|&k| (skip..grid.len()).map(|s| frame.population(&traj, s, k)).collect()).collect();
            let max_leakage = (0..times.len()).map(|s| series.iter().map(|p| p[s]).sum::<f64>()).fold(0.0, f64::max);
            let mut lines = Vec::new();
            for (j, &k) in outside.iter().enumerate() {
                let population = series[j].iter().copied().fold(0.0, f64::max);
                if population <= threshold {
                    continue;
                }
                let frequency =
                    if times.len() >= 4 { spectral_peak(times, &series[j])?.map(|p| p.frequency) } else { None };
                let label = frame.basis.label(k);
                lines.push(LeakageLine {
                    omega_phi: w,
                    frequency,
                    population,
                    max_leakage,
                    label: label_string(label),
                    coupler_excited: label[2] > 0,
                });
            }
            lines.sort_by(|a, b| b.population.total_cmp(&a.population));
            Ok(lines)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_column.into_iter().flatten().collect())
}

pub fn write_leakage_csv<W: Write>(out: &mut W, lines: &[LeakageLine]) -> Result<()> {
    writeln!(out, "omega_phi_ghz,frequency_ghz,population,max_leakage,label,coupler_excited")?;
    for l in lines {
        let f = l.frequency.map(|f| format!("{f:.9e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.9},{},{:.6e},{:.6e},{},{}",
            l.omega_phi, f, l.population, l.max_leakage, l.label, l.coupler_excited
        )?;
    }
    Ok(())
}
