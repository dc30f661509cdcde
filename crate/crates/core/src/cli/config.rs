//! TOML run configuration shared by all `pgsim` commands.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceSpec, Envelope, FluxPulse, DEFAULT_EDGE_TIME};
use crate::effective::{AlphaOptions, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::{HilbertConfig, LabeledBasis};
use crate::metrics::Compensation;
use crate::spectroscopy::{ScanOptions, SearchGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every Monte Carlo estimate.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "DeviceSpec::reference")]
    pub device: DeviceSpec,
    #[serde(default)]
    pub hilbert: HilbertConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub scan: ScanOptions,
    #[serde(default)]
    pub chevron: ChevronConfig,
    #[serde(default)]
    pub strengths: StrengthsConfig,
    #[serde(default)]
    pub leakage: LeakageConfig,
    #[serde(default)]
    pub fidelity: FidelityConfig,
    #[serde(default)]
    pub calibrate: CalibrateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            device: DeviceSpec::reference(),
            hilbert: HilbertConfig::default(),
            pulse: PulseConfig::default(),
            scan: ScanOptions::default(),
            chevron: ChevronConfig::default(),
            strengths: StrengthsConfig::default(),
            leakage: LeakageConfig::default(),
            fidelity: FidelityConfig::default(),
            calibrate: CalibrateConfig::default(),
        }
    }
}

/// Bias and modulation shared by the commands; ω_Φ and the duration are set per command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    /// Φ0.
    pub theta: f64,
    /// Φ0.
    pub delta: f64,
    /// ns.
    pub edge_time: f64,
    pub envelope: Envelope,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig { theta: -0.108, delta: 0.065, edge_time: DEFAULT_EDGE_TIME, envelope: Envelope::default() }
    }
}

impl PulseConfig {
    pub fn template(&self) -> FluxPulse {
        FluxPulse {
            envelope: self.envelope,
            edge_time: self.edge_time,
            ..FluxPulse::new(self.theta, self.delta, 0.0, 10.0 * self.edge_time.max(1.0))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChevronConfig {
    pub gate: Gate,
    /// GHz; defaults to the static dressed transition plus the modulation-induced shift.
    pub omega_center: Option<f64>,
    /// GHz; defaults to 15 MHz (iSWAP) or 8 MHz (bSWAP).
    pub omega_half_width: Option<f64>,
    pub omega_points: usize,
    /// ns.
    pub t_max: f64,
    pub t_points: usize,
}

impl Default for ChevronConfig {
    fn default() -> Self {
        ChevronConfig {
            gate: Gate::Iswap,
            omega_center: None,
            omega_half_width: None,
            omega_points: 41,
            t_max: 2000.0,
            t_points: 201,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrengthsConfig {
    /// Φ0.
    pub deltas: Vec<f64>,
    /// Second-order column from the periodic α solution.
    pub ode: bool,
    /// Numeric column from chevron spectroscopy of the full circuit (slow).
    pub numeric: bool,
    pub samples_per_period: usize,
    pub alpha: AlphaOptions,
    pub search: SearchGrid,
}

impl Default for StrengthsConfig {
    fn default() -> Self {
        StrengthsConfig {
            deltas: (1..=15).map(|k| k as f64 / 100.0).collect(),
            ode: true,
            numeric: true,
            samples_per_period: 256,
            alpha: AlphaOptions::default(),
            search: SearchGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeakageConfig {
    pub gate: Gate,
    /// Φ0; defaults to `pulse.delta`.
    pub delta: Option<f64>,
    /// GHz; the band defaults to the predicted resonance ± 0.3 GHz (iSWAP) or ± 0.5 GHz (bSWAP).
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_points: usize,
    /// ns.
    pub t_max: f64,
    pub t_points: usize,
    pub threshold: f64,
    /// Defaults to |100⟩ (iSWAP) or |000⟩ (bSWAP).
    pub initial: Option<String>,
    /// Defaults to the gate's two-state subspace.
    pub subspace: Option<Vec<String>>,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig {
            gate: Gate::Iswap,
            delta: None,
            omega_min: None,
            omega_max: None,
            omega_points: 121,
            t_max: 2000.0,
            t_points: 401,
            threshold: 1e-5,
            initial: None,
            subspace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityConfig {
    pub gate: Gate,
    /// Φ0.
    pub deltas: Vec<f64>,
    pub compensation: Compensation,
    /// Use the T1/T2 of the device section; false simulates the closed system.
    pub dissipation: bool,
    /// Haar-random states for the Monte Carlo cross-check of each channel; 0 disables it.
    pub mc_samples: usize,
    pub refine: bool,
    /// Target rotation angle, radians.
    pub angle: f64,
    /// ns.
    pub max_duration: f64,
    pub search: SearchGrid,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig {
            gate: Gate::Iswap,
            deltas: vec![0.02, 0.045, 0.065, 0.09, 0.11, 0.13],
            compensation: Compensation::default(),
            dissipation: true,
            mc_samples: 10_000,
            refine: true,
            angle: PI / 2.0,
            max_duration: 20_000.0,
            search: SearchGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateConfig {
    pub gate: Gate,
    /// Measured (drive amplitude, resonance shift in GHz) pairs.
    pub pairs: Vec<[f64; 2]>,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig { gate: Gate::Iswap, pairs: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Chevron,
    Strengths,
    Leakage,
    Fidelity,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Chevron => "chevron",
            Command::Strengths => "strengths",
            Command::Leakage => "leakage",
            Command::Fidelity => "fidelity",
            Command::Calibrate => "calibrate",
        }
    }
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } if !name.contains('.') => {
            Error::InvalidParameter { name: format!("{section}.{name}"), reason }
        }
        e => e,
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, "must be positive"))
    }
}

fn at_least(name: &str, n: usize, min: usize) -> Result<()> {
    if n >= min {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("needs at least {min} points")))
    }
}

fn deltas_ok(name: &str, deltas: &[f64], theta: f64) -> Result<()> {
    if deltas.is_empty() {
        return Err(Error::invalid(name, "must not be empty"));
    }
    for &d in deltas {
        if !(d >= 0.0) || !(theta.abs() + d < 0.5) {
            return Err(Error::invalid(name, format!("{d} must satisfy 0 <= delta and |theta| + delta < 0.5")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            if path.is_empty() || path == "." {
                Error::Config(msg)
            } else {
                Error::Config(format!("{path}: {msg}"))
            }
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Full validation of the sections `command` reads, before any computation.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.device.validate()?;
        self.hilbert.validate()?;
        self.pulse.template().validate()?;
        self.scan.propagation.validate()?;
        let theta = self.pulse.theta;
        match command {
            Command::Chevron => {
                let c = &self.chevron;
                if let Some(w) = c.omega_center {
                    positive("chevron.omega_center", w)?;
                }
                if let Some(h) = c.omega_half_width {
                    positive("chevron.omega_half_width", h)?;
                }
                at_least("chevron.omega_points", c.omega_points, 1)?;
                positive("chevron.t_max", c.t_max)?;
                at_least("chevron.t_points", c.t_points, 8)?;
            }
            Command::Strengths => {
                let s = &self.strengths;
                deltas_ok("strengths.deltas", &s.deltas, theta)?;
                s.alpha.validate().map_err(|e| prefixed("strengths.alpha", e))?;
                s.search.validate().map_err(|e| prefixed("strengths.search", e))?;
                at_least("strengths.samples_per_period", s.samples_per_period, 16)?;
            }
            Command::Leakage => {
                let l = &self.leakage;
                deltas_ok("leakage.delta", &[l.delta.unwrap_or(self.pulse.delta)], theta)?;
                for (name, w) in [("leakage.omega_min", l.omega_min), ("leakage.omega_max", l.omega_max)] {
                    if let Some(w) = w {
                        positive(name, w)?;
                    }
                }
                if let (Some(a), Some(b)) = (l.omega_min, l.omega_max) {
                    if !(a < b) {
                        return Err(Error::invalid("leakage.omega_max", "must exceed omega_min"));
                    }
                }
                at_least("leakage.omega_points", l.omega_points, 1)?;
                positive("leakage.t_max", l.t_max)?;
                at_least("leakage.t_points", l.t_points, 8)?;
                positive("leakage.threshold", l.threshold)?;
                let basis = LabeledBasis::new(&self.hilbert);
                let (initial, subspace) = leakage_labels(l);
                basis.parse(&initial)?;
                for s in &subspace {
                    basis.parse(s)?;
                }
                if !subspace.contains(&initial) {
                    return Err(Error::invalid("leakage.subspace", "must contain the initial label"));
                }
            }
            Command::Fidelity => {
                let f = &self.fidelity;
                deltas_ok("fidelity.deltas", &f.deltas, theta)?;
                if f.deltas.iter().any(|&d| d == 0.0) {
                    return Err(Error::invalid("fidelity.deltas", "a gate needs a nonzero modulation amplitude"));
                }
                f.search.validate().map_err(|e| prefixed("fidelity.search", e))?;
                positive("fidelity.angle", f.angle)?;
                positive("fidelity.max_duration", f.max_duration)?;
                if f.dissipation {
                    crate::dynamics::rates_from_specs(&self.device)?;
                }
            }
            Command::Calibrate => {
                let c = &self.calibrate;
                if c.pairs.len() < 3 {
                    return Err(Error::invalid(
                        "calibrate.pairs",
                        format!("need at least 3 (amplitude, shift) pairs, got {}", c.pairs.len()),
                    ));
                }
                if c.pairs.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::invalid("calibrate.pairs", "must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// Initial label and two-state subspace of a leakage scan, with gate defaults filled in.
pub fn leakage_labels(l: &LeakageConfig) -> (String, Vec<String>) {
    let (a, b) = match l.gate {
        Gate::Iswap => ("100", "010"),
        Gate::Bswap => ("000", "110"),
    };
    let initial = l.initial.clone().unwrap_or_else(|| a.to_string());
    let subspace = l.subspace.clone().unwrap_or_else(|| vec![a.to_string(), b.to_string()]);
    (initial, subspace)
}
