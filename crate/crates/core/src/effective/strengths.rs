//! Gate strengths, dispersive shifts and calibration helpers.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::alpha::{periodic_grid, solve_alpha_ode, static_detuning, AlphaOptions, AlphaSolution};
use super::couplings::omega_pair;
use super::{Gate, Sign};
use crate::device::{transfer_expansion, DeviceSpec, Envelope, FluxPulse, Transfer};
use crate::error::{Error, Result};

/// Half-width of the excluded band around the poles of the dispersive-shift formula, GHz.
pub const DISPERSIVE_POLE_GUARD: f64 = 0.010;

fn detunings(device: &DeviceSpec, theta: f64) -> [[f64; 2]; 2] {
    std::array::from_fn(|i| {
        std::array::from_fn(|s| static_detuning(device, theta, i + 1, [Sign::Minus, Sign::Plus][s]))
    })
}

fn d1(device: &DeviceSpec, theta: f64) -> Result<f64> {
    Ok(transfer_expansion(device, theta)?.d1)
}

/// Ω⁻_eff = δ (g1g2/4) d1 (1/(Δ⁻₁Δ⁻₂) + 1/(Δ⁺₁Δ⁺₂)), GHz.
pub fn gate_strength_iswap(device: &DeviceSpec, theta: f64, delta: f64) -> Result<f64> {
    let d = detunings(device, theta);
    let bracket = 1.0 / (d[0][0] * d[1][0]) + 1.0 / (d[0][1] * d[1][1]);
    Ok(delta * device.g1 * device.g2 / 4.0 * d1(device, theta)? * bracket)
}

/// Ω⁺_eff = −δ (g1g2/4) d1 (1/(Δ⁻₁Δ⁺₂) + 1/(Δ⁺₁Δ⁻₂)), GHz.
pub fn gate_strength_bswap(device: &DeviceSpec, theta: f64, delta: f64) -> Result<f64> {
    let d = detunings(device, theta);
    let bracket = 1.0 / (d[0][0] * d[1][1]) + 1.0 / (d[0][1] * d[1][0]);
    Ok(-delta * device.g1 * device.g2 / 4.0 * d1(device, theta)? * bracket)
}

/// Ω_ad = δ (g1g2/8) d1 Σ_i (1/(Δ⁻ᵢ)² + 1/(Δ⁺ᵢ)²), GHz; the same for both gates.
pub fn gate_strength_adiabatic(device: &DeviceSpec, theta: f64, delta: f64) -> Result<f64> {
    let d = detunings(device, theta);
    let sum: f64 = d.iter().flatten().map(|x| 1.0 / (x * x)).sum();
    Ok(delta * device.g1 * device.g2 / 8.0 * d1(device, theta)? * sum)
}

pub fn gate_strength(device: &DeviceSpec, theta: f64, delta: f64, gate: Gate) -> Result<f64> {
    match gate {
        Gate::Iswap => gate_strength_iswap(device, theta, delta),
        Gate::Bswap => gate_strength_bswap(device, theta, delta),
    }
}

/// |δ d1| ν_Φ / |Δ_{i,s}^θ|², indexed `[qubit − 1][sign]`. Adiabatic elimination needs all ≪ 1.
pub fn adiabatic_validity(device: &DeviceSpec, theta: f64, delta: f64, omega_phi: f64) -> Result<[[f64; 2]; 2]> {
    let d = detunings(device, theta);
    let a = (delta * d1(device, theta)?).abs() * omega_phi.abs();
    Ok(std::array::from_fn(|i| std::array::from_fn(|s| a / (d[i][s] * d[i][s]))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateStrengths {
    pub iswap: f64,
    pub bswap: f64,
    pub adiabatic: f64,
    /// Largest adiabatic-validity ratio over the four channels.
    pub validity_ratio: f64,
}

pub fn gate_strengths(device: &DeviceSpec, theta: f64, delta: f64, omega_phi: f64) -> Result<GateStrengths> {
    device.validate()?;
    let v = adiabatic_validity(device, theta, delta, omega_phi)?;
    Ok(GateStrengths {
        iswap: gate_strength_iswap(device, theta, delta)?,
        bswap: gate_strength_bswap(device, theta, delta)?,
        adiabatic: gate_strength_adiabatic(device, theta, delta)?,
        validity_ratio: v.iter().flatten().fold(0.0, |m, &x| m.max(x)),
    })
}

/// Static Lamb shift plus modulation-induced AC shift of each qubit, and the resulting
/// resonant modulation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersiveShift {
    pub gate: Gate,
    pub delta: f64,
    /// g_i²(1/Δ⁻ᵢ + 1/Δ⁺ᵢ), GHz.
    pub lamb: [f64; 2],
    /// Second-order-in-δ term, GHz.
    pub ac: [f64; 2],
    /// lamb + ac.
    pub shift: [f64; 2],
    /// ν1 ± ν2, signed, GHz.
    pub bare: f64,
    /// |ν1 ± ν2 + δω̄1 ± δω̄2|, GHz.
    pub omega_phi: f64,
}

impl DispersiveShift {
    /// Shift of the resonant modulation frequency from |ν1 ± ν2|, GHz.
    pub fn resonance_shift(&self) -> f64 {
        self.omega_phi - self.bare.abs()
    }
}

pub fn dispersive_shift(device: &DeviceSpec, theta: f64, delta: f64, gate: Gate) -> Result<DispersiveShift> {
    device.validate()?;
    let d = detunings(device, theta);
    let w = gate.bare_frequency(device);
    for row in &d {
        for &x in row {
            if (w.abs() - x.abs()).abs() < DISPERSIVE_POLE_GUARD {
                return Err(Error::DispersivePole { omega: w, pole: x, guard: DISPERSIVE_POLE_GUARD });
            }
        }
    }
    let dd = d1(device, theta)?;
    let w2 = w * w;
    let mut lamb = [0.0; 2];
    let mut ac = [0.0; 2];
    for i in 0..2 {
        let g2 = device.g(i + 1).powi(2);
        let (dm, dp) = (d[i][0], d[i][1]);
        let nu = device.qubit(i + 1).frequency;
        lamb[i] = g2 * (1.0 / dm + 1.0 / dp);
        ac[i] = -dd * dd * delta * delta / w2 * g2 * nu * (w2 - dm * dp) / ((w2 - dm * dm) * (w2 - dp * dp));
    }
    let shift = [lamb[0] + ac[0], lamb[1] + ac[1]];
    let s = gate.sign().value();
    Ok(DispersiveShift { gate, delta, lamb, ac, shift, bare: w, omega_phi: (w + shift[0] + s * shift[1]).abs() })
}

/// d(resonance shift)/d(δ²), GHz per Φ0².
pub fn ac_shift_coefficient(device: &DeviceSpec, theta: f64, gate: Gate) -> Result<f64> {
    let a = dispersive_shift(device, theta, 1.0, gate)?;
    let s = gate.sign().value();
    let sum = a.ac[0] + s * a.ac[1];
    let total = a.bare + a.shift[0] + s * a.shift[1];
    Ok(total.signum() * sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    /// Flux amplitude per drive unit, Φ0/a.u.
    pub scale: f64,
    /// Constant frequency offset, GHz.
    pub offset: f64,
    /// Root-mean-square fit residual, GHz.
    pub residual: f64,
    /// Shift per δ² used by the fit, GHz/Φ0².
    pub kappa: f64,
}

/// Fit shift(a) = κ (scale·a)² + offset to measured (drive amplitude, resonance shift) pairs.
pub fn calibrate_delta(points: &[(f64, f64)], device: &DeviceSpec, theta: f64, gate: Gate) -> Result<Calibration> {
    if points.len() < 3 {
        return Err(Error::CalibrationFailed(format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|(a, y)| !a.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("points", "must be finite"));
    }
    let kappa = ac_shift_coefficient(device, theta, gate)?;
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(a, _)| a * a).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-14 * (1.0 + mx * mx) * n {
        return Err(Error::CalibrationFailed("degenerate design: all drive amplitudes have equal magnitude".into()));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let offset = my - beta * mx;
    if !(kappa != 0.0 && beta / kappa > 0.0) {
        return Err(Error::CalibrationFailed(format!(
            "fitted curvature {beta:.3e} GHz/a.u.^2 has the wrong sign for shift coefficient {kappa:.3e}"
        )));
    }
    let residual = (xs.iter().zip(points).map(|(x, p)| (beta * x + offset - p.1).powi(2)).sum::<f64>() / n).sqrt();
    Ok(Calibration { scale: (beta / kappa).sqrt(), offset, residual, kappa })
}

/// Smallest duration T whose envelope area gives 2π·rate·∫₀ᵀE = angle.
///
/// `rate` is the coefficient of (X + X†) in GHz, i.e. twice Ω_eff; only the envelope shape and
/// edge time of `template` are used.
pub fn gate_time_for_angle(rate: f64, template: &FluxPulse, angle: f64, max_duration: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid("strength", "must be positive"));
    }
    if !(angle > 0.0 && angle.is_finite()) {
        return Err(Error::invalid("angle", "must be positive"));
    }
    let flat = angle / (2.0 * PI * rate);
    let t = match template.envelope {
        Envelope::PureSquare => flat,
        Envelope::SquareGaussianEdges => {
            let t = flat + 2.0 * template.edge_deficit();
            if t < 2.0 * template.edge_time {
                return Err(Error::CalibrationFailed(format!(
                    "angle {angle} is passed before both {} ns edges complete",
                    template.edge_time
                )));
            }
            t
        }
    };
    if t > max_duration {
        return Err(Error::CalibrationFailed(format!("angle {angle} needs {t:.1} ns, above the {max_duration} ns limit")));
    }
    Ok(t)
}

/// Second-order prediction of the resonance and strength from the α-ODE with a
/// second-order transfer expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdePrediction {
    pub gate: Gate,
    pub delta: f64,
    /// Self-consistent resonant modulation frequency, GHz.
    pub omega_phi: f64,
    /// Ω_eff, GHz.
    pub strength: f64,
    /// Mean ω̃_i − ν_i, GHz.
    pub shift: [f64; 2],
    pub iterations: usize,
}

/// Periodic particular solution on the first `per` samples of a one-period ODE run.
fn periodic_part(sol: &AlphaSolution, per: usize) -> [[Vec<C64>; 2]; 2] {
    let phase = sol.phase.as_ref().expect("ODE route fills the phase");
    let n = sol.times.len();
    std::array::from_fn(|i| {
        std::array::from_fn(|s| {
            let a = &sol.alpha[i][s];
            let ph = &phase[i][s];
            let c = (a[0] - a[n - 1]) / (C64::new(1.0, 0.0) - C64::from_polar(1.0, -ph[n - 1]));
            (0..per).map(|j| a[j] - c * C64::from_polar(1.0, -ph[j])).collect()
        })
    })
}

/// Resonance and Ω_eff from the periodic α: ν_Φ is iterated to |mean Δ_±|, then the
/// resonant harmonic of Ω_±(t)e^{iφ_±(t)} is extracted including the phase modulation.
pub fn ode_gate_prediction(
    device: &DeviceSpec,
    theta: f64,
    delta: f64,
    gate: Gate,
    transfer: Transfer,
    samples_per_period: usize,
    opts: &AlphaOptions,
) -> Result<OdePrediction> {
    device.validate()?;
    let m = samples_per_period.max(16);
    let s = gate.sign().value();
    let mut omega = match dispersive_shift(device, theta, delta, gate) {
        Ok(d) => d.omega_phi,
        Err(_) => gate.bare_frequency(device).abs(),
    };
    let mut iterations = 0;
    loop {
        iterations += 1;
        let pulse = FluxPulse::square(theta, delta, omega, 1.0 / omega);
        let grid = periodic_grid(omega, 1, m)?;
        let sol = solve_alpha_ode(device, &pulse, transfer, &grid, opts)?;
        let p = periodic_part(&sol, m);
        let tilde: [Vec<f64>; 2] = std::array::from_fn(|i| {
            (0..m).map(|j| device.qubit(i + 1).frequency + device.g(i + 1) * (p[i][0][j].re + p[i][1][j].re)).collect()
        });
        let det: Vec<f64> = (0..m).map(|j| tilde[0][j] + s * tilde[1][j]).collect();
        let mean = det.iter().sum::<f64>() / m as f64;
        let next = mean.abs();
        let converged = (next - omega).abs() < 1e-10;
        if !converged && iterations < 40 {
            omega = next;
            continue;
        }
        if !converged {
            return Err(Error::CalibrationFailed("self-consistent resonance did not converge".into()));
        }
        // ψ(t) = 2π∫₀ᵗ(Δ − mean) from its Fourier series.
        let times = &grid[..m];
        let w = 2.0 * PI * omega;
        let half = (m / 2) as i64;
        let mut psi = vec![0.0f64; m];
        for k in (-half + 1)..half {
            if k == 0 {
                continue;
            }
            let dk: C64 = det
                .iter()
                .zip(times)
                .map(|(&x, &t)| (x - mean) * C64::from_polar(1.0, -(k as f64) * w * t))
                .sum::<C64>()
                / m as f64;
            for (j, &t) in times.iter().enumerate() {
                let e = C64::from_polar(1.0, k as f64 * w * t) - 1.0;
                psi[j] += (2.0 * PI * dk * e / C64::new(0.0, k as f64 * w)).re;
            }
        }
        let kstar = -mean.signum();
        let coupling: C64 = (0..m)
            .map(|j| {
                let a: [[C64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|q| p[i][q][j]));
                let (om, op) = omega_pair(device.g1, device.g2, a);
                let o = if gate == Gate::Iswap { om } else { op };
                o * C64::from_polar(1.0, psi[j] - kstar * w * times[j])
            })
            .sum::<C64>()
            / m as f64;
        let shift = [
            tilde[0].iter().sum::<f64>() / m as f64 - device.q1.frequency,
            tilde[1].iter().sum::<f64>() / m as f64 - device.q2.frequency,
        ];
        return Ok(OdePrediction { gate, delta, omega_phi: omega, strength: 0.5 * coupling.norm(), shift, iterations });
    }
}
