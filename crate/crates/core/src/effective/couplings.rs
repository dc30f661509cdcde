//! Effective couplings Ω_±(t), shifted frequencies and interaction-picture phases.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::alpha::{AlphaSolution, FourierAlpha};
use super::{Gate, Sign};
use crate::device::DeviceSpec;

#[derive(Debug, Clone)]
pub struct EffectiveCouplings {
    pub times: Vec<f64>,
    /// Ω_−(t), Ω_+(t), GHz.
    pub omega_minus: Vec<C64>,
    pub omega_plus: Vec<C64>,
    /// ω̃_1(t), ω̃_2(t), GHz.
    pub omega_tilde: [Vec<f64>; 2],
    /// φ_±(t) = 2π∫_{t0}^t (ω̃_1 ± ω̃_2), radians.
    pub phi_minus: Vec<f64>,
    pub phi_plus: Vec<f64>,
}

impl EffectiveCouplings {
    pub fn coupling(&self, gate: Gate) -> &[C64] {
        match gate {
            Gate::Iswap => &self.omega_minus,
            Gate::Bswap => &self.omega_plus,
        }
    }

    pub fn phase(&self, gate: Gate) -> &[f64] {
        match gate {
            Gate::Iswap => &self.phi_minus,
            Gate::Bswap => &self.phi_plus,
        }
    }
}

pub(crate) fn omega_pair(g1: f64, g2: f64, a: [[C64; 2]; 2]) -> (C64, C64) {
    let (a1m, a1p, a2m, a2p) = (a[0][0], a[0][1], a[1][0], a[1][1]);
    let minus = -0.5 * (g1 * a2p.conj() + g2 * a1p - g1 * a2m.conj() - g2 * a1m);
    let plus = -0.5 * (g1 * a2p + g2 * a1p - g1 * a2m - g2 * a1m);
    (minus, plus)
}

/// Ω_±, ω̃_i and φ_± from the dressing amplitudes. The couplings g_i are taken from
/// `device`, so they may differ from the ones used to solve for α.
pub fn effective_couplings(alpha: &AlphaSolution, device: &DeviceSpec) -> EffectiveCouplings {
    let n = alpha.times.len();
    let (g1, g2) = (device.g1, device.g2);
    let mut omega_minus = Vec::with_capacity(n);
    let mut omega_plus = Vec::with_capacity(n);
    let mut tilde = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for k in 0..n {
        let a: [[C64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|s| alpha.alpha[i][s][k]));
        let (m, p) = omega_pair(g1, g2, a);
        omega_minus.push(m);
        omega_plus.push(p);
        tilde[0].push(device.q1.frequency + g1 * (a[0][0].re + a[0][1].re));
        tilde[1].push(device.q2.frequency + g2 * (a[1][0].re + a[1][1].re));
    }
    let cumulative = |sign: f64| {
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        for k in 0..n {
            if k > 0 {
                let dt = alpha.times[k] - alpha.times[k - 1];
                let f0 = tilde[0][k - 1] + sign * tilde[1][k - 1];
                let f1 = tilde[0][k] + sign * tilde[1][k];
                acc += PI * dt * (f0 + f1);
            }
            out.push(acc);
        }
        out
    };
    let phi_minus = cumulative(-1.0);
    let phi_plus = cumulative(1.0);
    EffectiveCouplings { times: alpha.times.clone(), omega_minus, omega_plus, omega_tilde: tilde, phi_minus, phi_plus }
}

/// Fourier component Ω̄_∓(k) of the gate's coupling built from the coefficients ᾱ(k).
/// α* contributes conj(ᾱ(−k)) to harmonic k.
pub fn fourier_coupling(fa: &FourierAlpha, device: &DeviceSpec, gate: Gate, k: i64) -> C64 {
    let (g1, g2) = (device.g1, device.g2);
    let c = |q, s, k| fa.coeff(q, s, k);
    match gate {
        Gate::Iswap => {
            -0.5 * (g1 * c(2, Sign::Plus, -k).conj() + g2 * c(1, Sign::Plus, k)
                - g1 * c(2, Sign::Minus, -k).conj()
                - g2 * c(1, Sign::Minus, k))
        }
        Gate::Bswap => {
            -0.5 * (g1 * c(2, Sign::Plus, k) + g2 * c(1, Sign::Plus, k)
                - g1 * c(2, Sign::Minus, k)
                - g2 * c(1, Sign::Minus, k))
        }
    }
}

fn embed(gate: Gate, element: C64) -> Array2<C64> {
    let (lo, hi) = gate.active_pair();
    let mut h = Array2::zeros((4, 4));
    h[[hi, lo]] = element;
    h[[lo, hi]] = element.conj();
    h
}

/// Interaction-picture H_eff(t) for one gate term, rad/ns, linearly interpolated in t.
/// Only the gate's own term is kept: Ω_−e^{iφ_−}σ⁺₁σ⁻₂ + h.c. or Ω_+e^{iφ_+}σ⁺₁σ⁺₂ + h.c.
pub fn effective_two_qubit_hamiltonian(c: &EffectiveCouplings, gate: Gate, t: f64) -> Array2<C64> {
    let times = &c.times;
    let n = times.len();
    let (k, w) = if n < 2 || t <= times[0] {
        (0, 0.0)
    } else if t >= times[n - 1] {
        (n - 2, 1.0)
    } else {
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        let k = (((t - times[0]) / dt) as usize).min(n - 2);
        (k, (t - times[k]) / dt)
    };
    let omega = c.coupling(gate);
    let phase = c.phase(gate);
    let at = |j: usize| omega[j] * C64::from_polar(1.0, phase[j]);
    let el = if n < 2 { at(0) } else { at(k) * (1.0 - w) + at(k + 1) * w };
    embed(gate, 2.0 * PI * el)
}

/// Resonant static form Ω_eff(XX ± YY) = 2Ω_eff(X + X†), rad/ns; `strength` is Ω_eff in GHz.
pub fn static_gate_hamiltonian(gate: Gate, strength: f64) -> Array2<C64> {
    embed(gate, C64::new(2.0 * PI * 2.0 * strength, 0.0))
}
