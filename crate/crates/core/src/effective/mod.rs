//! Effective two-qubit description of the parametrically driven coupler.

pub mod alpha;
pub mod bessel;
pub mod couplings;
pub mod strengths;

#[cfg(test)]
mod tests;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::device::DeviceSpec;

pub use alpha::{
    adiabatic_alpha, bessel_alpha, integration_constant, periodic_grid, sideband_hit, solve_alpha_ode,
    static_detuning, AlphaOptions, AlphaSolution, AlphaSolver, FourierAlpha, SidebandHit,
};
pub use couplings::{
    effective_couplings, effective_two_qubit_hamiltonian, fourier_coupling, static_gate_hamiltonian,
    EffectiveCouplings,
};
pub use strengths::{
    adiabatic_validity, ac_shift_coefficient, calibrate_delta, dispersive_shift, gate_strength,
    gate_strength_adiabatic, gate_strength_bswap, gate_strength_iswap, gate_strengths, gate_time_for_angle,
    ode_gate_prediction, Calibration, DispersiveShift, GateStrengths, OdePrediction,
};

/// Which counter-rotating partner of a qubit–coupler detuning, Δ_{i,±} = ν_i ± ν_c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Minus => 0,
            Sign::Plus => 1,
        }
    }
}

/// Exchange (iSWAP-type, driven at |ν1 − ν2|) or two-photon (bSWAP-type, at ν1 + ν2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Iswap,
    Bswap,
}

impl Gate {
    pub fn sign(self) -> Sign {
        match self {
            Gate::Iswap => Sign::Minus,
            Gate::Bswap => Sign::Plus,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::Iswap => "iswap",
            Gate::Bswap => "bswap",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iswap" => Ok(Gate::Iswap),
            "bswap" => Ok(Gate::Bswap),
            _ => Err(crate::Error::invalid("gate", format!("expected iswap or bswap, got `{s}`"))),
        }
    }

    /// Signed bare sum or difference ν1 ± ν2, GHz.
    pub fn bare_frequency(self, device: &DeviceSpec) -> f64 {
        device.q1.frequency + self.sign().value() * device.q2.frequency
    }

    /// Computational indices (|n1 n2⟩ → 2 n1 + n2) of the pair the gate rotates,
    /// ordered (lower, raised): |01⟩→|10⟩ or |00⟩→|11⟩.
    pub fn active_pair(self) -> (usize, usize) {
        match self {
            Gate::Iswap => (1, 2),
            Gate::Bswap => (0, 3),
        }
    }

    /// exp(−iϑ(X + X†)) on the two-qubit space, with X = σ⁺₁σ⁻₂ or σ⁺₁σ⁺₂.
    /// ϑ = π/2 gives the full swap of the active pair with a −i phase.
    pub fn ideal_unitary(self, angle: f64) -> Array2<C64> {
        let (a, b) = self.active_pair();
        let mut u = Array2::eye(4);
        let (c, s) = (angle.cos(), angle.sin());
        u[[a, a]] = C64::new(c, 0.0);
        u[[b, b]] = C64::new(c, 0.0);
        u[[a, b]] = C64::new(0.0, -s);
        u[[b, a]] = C64::new(0.0, -s);
        u
    }
}

impl std::fmt::Display for Gate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
