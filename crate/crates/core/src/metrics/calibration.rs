//! Gate calibration and error sweeps over the modulation amplitude.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channel::{reconstruct_channel, unitary_channel, ChannelOptions, QuantumChannel};
use super::fidelity::{fidelity_report, Compensation, FidelityReport};
use crate::device::{DeviceSpec, FluxPulse};
use crate::dynamics::DissipationRates;
use crate::effective::{gate_time_for_angle, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::HilbertConfig;
use crate::optim::brent_minimize;
use crate::spectroscopy::{locate_resonance, ScanOptions, SearchGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateOptions {
    pub channel: ChannelOptions,
    pub search: SearchGrid,
    pub compensation: Compensation,
    /// Tune duration and drive frequency on the dissipation-free channel.
    pub refine: bool,
    /// Target rotation angle, radians.
    pub angle: f64,
    /// ns.
    pub max_duration: f64,
}

impl Default for GateOptions {
    fn default() -> Self {
        GateOptions {
            channel: ChannelOptions::default(),
            search: SearchGrid::default(),
            compensation: Compensation::default(),
            refine: true,
            angle: PI / 2.0,
            max_duration: 20_000.0,
        }
    }
}

impl GateOptions {
    fn scan(&self) -> ScanOptions {
        ScanOptions { transfer: self.channel.transfer, readout: self.channel.readout, propagation: self.channel.propagation }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibratedGate {
    pub gate: Gate,
    pub pulse: FluxPulse,
    /// Ω_eff from spectroscopy, GHz.
    pub strength: f64,
    /// Resonance from spectroscopy, GHz.
    pub resonance: f64,
    /// Duration from the strength alone, ns.
    pub estimate: f64,
    /// Error of the dissipation-free channel at the calibrated point.
    pub closed_error: f64,
}

/// Locates the resonance by spectroscopy, converts the measured strength into a duration for
/// the target angle, then (optionally) tunes duration and ω_Φ for the best dissipation-free
/// fidelity by alternating Brent searches.
pub fn calibrate_gate(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    template: &FluxPulse,
    gate: Gate,
    opts: &GateOptions,
) -> Result<CalibratedGate> {
    let search = locate_resonance(device, hilbert, template, gate, &opts.search, &opts.scan())?;
    let strength = search.strength();
    let resonance = search.omega_res();
    if !(strength > 0.0) {
        return Err(Error::CalibrationFailed(format!("no measurable gate strength at delta = {}", template.delta)));
    }
    let estimate = gate_time_for_angle(2.0 * strength, template, opts.angle, opts.max_duration)?;
    let closed = |pulse: &FluxPulse| -> f64 {
        unitary_channel(device, hilbert, pulse, &opts.channel)
            .and_then(|ch| fidelity_report(&ch, gate, opts.compensation))
            .map(|r| r.error)
            .unwrap_or(f64::INFINITY)
    };
    let mut pulse = template.with_omega_phi(resonance).with_duration(estimate);
    let mut err = closed(&pulse);
    if opts.refine {
        let t_span = 0.1 * estimate;
        let w_span = 0.5 * search.profile.f_min.max(1e-5);
        for _ in 0..2 {
            let base = pulse;
            let (t, e) = brent_minimize(
                |t| closed(&base.with_duration(t)),
                (estimate - t_span).max(2.0 * base.edge_time + 1.0),
                estimate + t_span,
                1e-5,
                40,
            );
            if e < err {
                pulse = pulse.with_duration(t);
                err = e;
            }
            let base = pulse;
            let (w, e) =
                brent_minimize(|w| closed(&base.with_omega_phi(w)), resonance - w_span, resonance + w_span, 1e-9, 40);
            if e < err {
                pulse = pulse.with_omega_phi(w);
                err = e;
            }
        }
    }
    if !err.is_finite() {
        return Err(Error::CalibrationFailed(format!("closed-system channel failed at delta = {}", template.delta)));
    }
    Ok(CalibratedGate { gate, pulse, strength, resonance, estimate, closed_error: err })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub calibration: CalibratedGate,
    pub channel: QuantumChannel,
    pub report: FidelityReport,
}

/// Per δ: calibrate, reconstruct the dissipative channel, report F, ε and leakage.
/// Points run in parallel; the output follows the order of `deltas`.
pub fn gate_error_sweep(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    rates: &DissipationRates,
    gate: Gate,
    template: &FluxPulse,
    deltas: &[f64],
    opts: &GateOptions,
) -> Result<Vec<SweepPoint>> {
    if deltas.is_empty() {
        return Err(Error::invalid("deltas", "must not be empty"));
    }
    for &d in deltas {
        template.with_delta(d).validate()?;
    }
    deltas
        .par_iter()
        .map(|&d| {
            let calibration = calibrate_gate(device, hilbert, &template.with_delta(d), gate, opts)?;
            let channel = reconstruct_channel(device, hilbert, &calibration.pulse, rates, &opts.channel)?;
            channel.check_trace(1e-6)?;
            let report = fidelity_report(&channel, gate, opts.compensation)?;
            Ok(SweepPoint { calibration, channel, report })
        })
        .collect()
}
