//! Static device parameters, the coupler flux transfer function and the flux pulse.
//!
//! Frequencies are ordinary frequencies in GHz, times in ns, flux in units of Φ0.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_COUPLER_ANHARMONICITY: f64 = -0.300;
pub const DEFAULT_EDGE_TIME: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonSpec {
    pub frequency: f64,
    pub anharmonicity: f64,
    /// Relaxation time in µs.
    #[serde(default)]
    pub t1: Option<f64>,
    /// Dephasing time in µs. Absent means no dephasing channel.
    #[serde(default)]
    pub t2: Option<f64>,
}

impl TransmonSpec {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(Error::invalid(&format!("{name}.frequency"), "must be positive"));
        }
        if !(self.anharmonicity.abs() < self.frequency) {
            return Err(Error::invalid(
                &format!("{name}.anharmonicity"),
                "|anharmonicity| must be smaller than the frequency",
            ));
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return Err(Error::invalid(&format!("{name}.t1"), "must be positive"));
            }
        }
        if let Some(t2) = self.t2 {
            if !(t2 > 0.0) {
                return Err(Error::invalid(&format!("{name}.t2"), "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub q1: TransmonSpec,
    pub q2: TransmonSpec,
    /// `frequency` is the zero-flux coupler frequency.
    pub coupler: TransmonSpec,
    pub g1: f64,
    pub g2: f64,
}

impl DeviceSpec {
    /// Two fixed-frequency transmons and a tunable coupler biased at the sweet spot.
    pub fn reference() -> Self {
        DeviceSpec {
            q1: TransmonSpec { frequency: 4.422, anharmonicity: -0.349, t1: Some(71.0), t2: Some(52.0) },
            q2: TransmonSpec { frequency: 4.999, anharmonicity: -0.330, t1: Some(59.0), t2: Some(32.0) },
            coupler: TransmonSpec {
                frequency: 6.006,
                anharmonicity: DEFAULT_COUPLER_ANHARMONICITY,
                t1: Some(11.6),
                t2: None,
            },
            g1: 0.109,
            g2: 0.117,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.q1.validate("q1")?;
        self.q2.validate("q2")?;
        self.coupler.validate("coupler")?;
        // g = 0 is allowed for decoupled test devices
        if !(self.g1 >= 0.0) || !(self.g2 >= 0.0) {
            return Err(Error::invalid("g", "couplings must be non-negative"));
        }
        Ok(())
    }

    pub fn qubit(&self, i: usize) -> &TransmonSpec {
        match i {
            1 => &self.q1,
            2 => &self.q2,
            _ => panic!("qubit index must be 1 or 2, got {i}"),
        }
    }

    pub fn g(&self, i: usize) -> f64 {
        match i {
            1 => self.g1,
            2 => self.g2,
            _ => panic!("qubit index must be 1 or 2, got {i}"),
        }
    }

    /// Largest g_i / |ν_i − ν_c(θ)|, for reporting how dispersive the bias point is.
    pub fn dispersive_ratio(&self, theta: f64) -> f64 {
        let nc = coupler_frequency(self, theta);
        (self.g1 / (self.q1.frequency - nc).abs()).max(self.g2 / (self.q2.frequency - nc).abs())
    }
}

/// ν_c(Φ) = ν_c⁰ √|cos(πΦ)|.
pub fn coupler_frequency(device: &DeviceSpec, phi: f64) -> f64 {
    device.coupler.frequency * (PI * phi).cos().abs().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    SquareGaussianEdges,
    PureSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxPulse {
    pub theta: f64,
    pub delta: f64,
    pub omega_phi: f64,
    pub duration: f64,
    #[serde(default = "default_edge_time")]
    pub edge_time: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

fn default_edge_time() -> f64 {
    DEFAULT_EDGE_TIME
}

impl FluxPulse {
    pub fn new(theta: f64, delta: f64, omega_phi: f64, duration: f64) -> Self {
        FluxPulse {
            theta,
            delta,
            omega_phi,
            duration,
            edge_time: DEFAULT_EDGE_TIME,
            envelope: Envelope::SquareGaussianEdges,
        }
    }

    pub fn square(theta: f64, delta: f64, omega_phi: f64, duration: f64) -> Self {
        FluxPulse { envelope: Envelope::PureSquare, ..Self::new(theta, delta, omega_phi, duration) }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        FluxPulse { duration, ..*self }
    }

    pub fn with_omega_phi(&self, omega_phi: f64) -> Self {
        FluxPulse { omega_phi, ..*self }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        FluxPulse { delta, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::invalid("pulse.delta", "must be non-negative"));
        }
        if !(self.theta.abs() + self.delta < 0.5) {
            return Err(Error::invalid("pulse", "|theta| + delta must stay below 0.5"));
        }
        if !(self.omega_phi >= 0.0) || !self.omega_phi.is_finite() {
            return Err(Error::invalid("pulse.omega_phi", "must be non-negative"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::invalid("pulse.duration", "must be non-negative"));
        }
        if self.envelope == Envelope::SquareGaussianEdges {
            if !(self.edge_time > 0.0) {
                return Err(Error::invalid("pulse.edge_time", "must be positive"));
            }
            if !(self.duration > 2.0 * self.edge_time) {
                return Err(Error::invalid("pulse.duration", "must exceed twice the edge time"));
            }
        }
        Ok(())
    }

    /// Envelope E(t) ∈ [0, 1]; zero outside the pulse window.
    pub fn envelope_at(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration {
            return 0.0;
        }
        match self.envelope {
            Envelope::PureSquare => 1.0,
            Envelope::SquareGaussianEdges => {
                let te = self.edge_time;
                let s = if t < te {
                    te - t
                } else if t > self.duration - te {
                    t - (self.duration - te)
                } else {
                    return 1.0;
                };
                let sigma = te / 2.5;
                let g0 = (-(2.5f64 * 2.5)).exp();
                let g = (-(s / sigma).powi(2)).exp();
                (g - g0) / (1.0 - g0)
            }
        }
    }

    /// Start and end of the flat top, where E ≡ 1.
    pub fn flat_window(&self) -> (f64, f64) {
        match self.envelope {
            Envelope::PureSquare => (0.0, self.duration),
            Envelope::SquareGaussianEdges => (self.edge_time, self.duration - self.edge_time),
        }
    }

    /// Area missing from one edge relative to a square pulse, ∫₀^{te} (1 − E) dt.
    pub fn edge_deficit(&self) -> f64 {
        match self.envelope {
            Envelope::PureSquare => 0.0,
            Envelope::SquareGaussianEdges => {
                let te = self.edge_time;
                te - gauss_legendre(|t| self.envelope_at(t), 0.0, te, 64)
            }
        }
    }

    /// ∫₀ᵀ E(t) dt.
    pub fn envelope_area(&self) -> f64 {
        self.duration - 2.0 * self.edge_deficit()
    }

    /// Modulation part of the flux, E(t)·δ·cos(2πν_Φ t). No window check.
    pub fn modulation(&self, t: f64) -> f64 {
        self.envelope_at(t) * self.delta * (2.0 * PI * self.omega_phi * t).cos()
    }
}

pub fn flux_at(pulse: &FluxPulse, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t <= pulse.duration) {
        return Err(Error::OutOfPulseWindow { t, duration: pulse.duration });
    }
    Ok(pulse.theta + pulse.modulation(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferExpansion {
    pub omega_theta: f64,
    pub d1: f64,
    pub d2: f64,
}

pub fn transfer_expansion(device: &DeviceSpec, theta: f64) -> Result<TransferExpansion> {
    let x = PI * theta;
    let c = x.cos();
    if !(c > 1e-9) {
        return Err(Error::invalid("theta", "degenerate bias: cos(pi*theta) must be positive"));
    }
    let s = x.sin();
    let nu0 = device.coupler.frequency;
    let sc = c.sqrt();
    Ok(TransferExpansion {
        omega_theta: coupler_frequency(device, theta),
        d1: -nu0 * PI * s / (2.0 * sc),
        d2: -nu0 * PI * PI * (0.5 * sc + s * s / (4.0 * c * sc)),
    })
}

/// How the coupler frequency follows the flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transfer {
    #[default]
    Exact,
    FirstOrder,
    SecondOrder,
}

impl Transfer {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Transfer::FirstOrder),
            2 => Ok(Transfer::SecondOrder),
            o => Err(Error::UnsupportedTransfer(format!("expansion order {o}"))),
        }
    }
}

pub fn expanded_coupler_frequency(
    exp: &TransferExpansion,
    pulse: &FluxPulse,
    t: f64,
    order: u32,
) -> Result<f64> {
    let x = pulse.modulation(t);
    match order {
        1 => Ok(exp.omega_theta + x * exp.d1),
        2 => Ok(exp.omega_theta + x * exp.d1 + 0.5 * x * x * exp.d2),
        o => Err(Error::UnsupportedTransfer(format!("expansion order {o}"))),
    }
}

/// Coupler frequency as a function of the modulation x = Φ − θ, for a fixed transfer model.
#[derive(Debug, Clone, Copy)]
pub struct CouplerCurve {
    nu0: f64,
    theta: f64,
    exp: TransferExpansion,
    transfer: Transfer,
}

impl CouplerCurve {
    pub fn new(device: &DeviceSpec, theta: f64, transfer: Transfer) -> Result<Self> {
        Ok(CouplerCurve {
            nu0: device.coupler.frequency,
            theta,
            exp: transfer_expansion(device, theta)?,
            transfer,
        })
    }

    pub fn at(&self, x: f64) -> f64 {
        match self.transfer {
            Transfer::Exact => self.nu0 * (PI * (self.theta + x)).cos().abs().sqrt(),
            Transfer::FirstOrder => self.exp.omega_theta + x * self.exp.d1,
            Transfer::SecondOrder => self.exp.omega_theta + x * self.exp.d1 + 0.5 * x * x * self.exp.d2,
        }
    }

    pub fn expansion(&self) -> &TransferExpansion {
        &self.exp
    }
}

/// Composite 5-point Gauss–Legendre quadrature on `panels` equal panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            sum += w * f(lo + x * h);
        }
    }
    sum * h
}

/// Gauss–Legendre nodes on [0, 1].
pub const GL5_NODES: [f64; 5] = [
    0.046_910_077_030_668_004,
    0.230_765_344_947_158_45,
    0.5,
    0.769_234_655_052_841_6,
    0.953_089_922_969_332,
];
pub const GL5_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_54,
    0.239_314_335_249_683_23,
    0.284_444_444_444_444_45,
    0.239_314_335_249_683_23,
    0.118_463_442_528_094_54,
];
