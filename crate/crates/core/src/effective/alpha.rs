//! Dressing amplitudes α_{i,±}(t) of the time-dependent Schrieffer–Wolff generator.
//!
//! Each amplitude obeys i α̇ = 2π(Δ(t) α − g) with Δ_{i,±}(t) = ν_i ± ν_c(t) (GHz, ns). Three
//! routes are provided: a numerical solution of the ODE, the Jacobi–Anger series for a
//! first-order transfer function, and the adiabatic value g/Δ(t).

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::bessel::bessel_j_sequence;
use super::Sign;
use crate::device::{
    transfer_expansion, DeviceSpec, FluxPulse, Transfer, GL5_NODES, GL5_WEIGHTS,
};
use crate::error::{Error, Result};
use crate::hamiltonian::CouplerDrive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaOptions {
    /// Longest integration substep, ns.
    pub substep: f64,
    /// Half-width of the forbidden band around each sideband |Δ|/n, GHz.
    pub sideband_guard: f64,
    /// Highest sideband order n checked by the guard.
    pub sideband_orders: u32,
    /// ODE residual tolerance relative to max g.
    pub residual_tol: f64,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        AlphaOptions { substep: 1e-3, sideband_guard: 0.010, sideband_orders: 4, residual_tol: 1e-8 }
    }
}

impl AlphaOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.substep > 0.0 && self.substep.is_finite()) {
            return Err(Error::invalid("substep", "must be positive"));
        }
        if !(self.sideband_guard >= 0.0) {
            return Err(Error::invalid("sideband_guard", "must be non-negative"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("residual_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSolver {
    Ode,
    Bessel,
    Adiabatic,
}

/// A modulation frequency that sits on the n-photon sideband of channel (qubit, sign).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidebandHit {
    pub qubit: usize,
    pub sign: Sign,
    pub order: u32,
    /// |Δ^θ|/n, GHz.
    pub sideband: f64,
}

/// Static detuning Δ_{i,s}^θ = ν_i + s ν_c(θ), GHz.
pub fn static_detuning(device: &DeviceSpec, theta: f64, qubit: usize, sign: Sign) -> f64 {
    device.qubit(qubit).frequency + sign.value() * crate::device::coupler_frequency(device, theta)
}

/// First sideband |Δ_{i,s}^θ|/n (n ≤ orders) within `guard` of ω_Φ, if any.
pub fn sideband_hit(device: &DeviceSpec, theta: f64, omega_phi: f64, guard: f64, orders: u32) -> Option<SidebandHit> {
    if omega_phi == 0.0 {
        return None;
    }
    for qubit in [1, 2] {
        for sign in [Sign::Minus, Sign::Plus] {
            let d = static_detuning(device, theta, qubit, sign).abs();
            for order in 1..=orders {
                let sideband = d / order as f64;
                if (omega_phi.abs() - sideband).abs() < guard {
                    return Some(SidebandHit { qubit, sign, order, sideband });
                }
            }
        }
    }
    None
}

fn sideband_error(hit: SidebandHit, omega_phi: f64, guard: f64) -> Error {
    Error::SidebandProximity { omega_phi, order: hit.order, sideband: hit.sideband, guard }
}

/// α_{i,s}(t) on a uniform grid, indexed `[qubit − 1][sign]` with sign 0 ↔ −, 1 ↔ +.
#[derive(Debug, Clone)]
pub struct AlphaSolution {
    pub times: Vec<f64>,
    pub alpha: [[Vec<C64>; 2]; 2],
    /// Δ_{i,s}(t) on the grid, GHz.
    pub detuning: [[Vec<f64>; 2]; 2],
    /// 2π∫_{t0}^t Δ_{i,s}, radians. Only the ODE route fills it.
    pub phase: Option<[[Vec<f64>; 2]; 2]>,
    pub pulse: FluxPulse,
    pub device: DeviceSpec,
    pub solver: AlphaSolver,
    /// Max-norm ODE residual divided by max g, when the grid resolves it.
    pub residual: Option<f64>,
    pub sideband: Option<SidebandHit>,
}

impl AlphaSolution {
    pub fn series(&self, qubit: usize, sign: Sign) -> &[C64] {
        &self.alpha[qubit - 1][sign.index()]
    }

    /// Fourier coefficients ᾱ(k), |k| ≤ kmax, of the periodic particular solution.
    ///
    /// The grid must cover a whole number of modulation periods with a whole number of
    /// samples per period. The homogeneous part c·e^{−iΦ(t)} fixed by the initial condition
    /// is removed first, which needs the accumulated phase of the ODE route.
    pub fn fourier(&self, kmax: usize) -> Result<FourierAlpha> {
        let w = self.pulse.omega_phi;
        let n = self.times.len();
        if n < 2 || w == 0.0 {
            return Err(Error::invalid("alpha", "Fourier analysis needs a modulated pulse and at least two samples"));
        }
        let t0 = self.times[0];
        let span = self.times[n - 1] - t0;
        let periods = span * w;
        let samples = (n - 1) as f64 / periods;
        if periods < 0.5 || (periods - periods.round()).abs() > 1e-6 || (samples - samples.round()).abs() > 1e-6 {
            return Err(Error::invalid("alpha", "grid must span whole modulation periods"));
        }
        let phase = self
            .phase
            .as_ref()
            .ok_or_else(|| Error::invalid("alpha", "Fourier analysis needs the ODE route"))?;
        let lambda = lambda_of(&self.device, &self.pulse)?;
        let mut coeffs: [[Vec<C64>; 2]; 2] = Default::default();
        for i in 0..2 {
            for s in 0..2 {
                let a = &self.alpha[i][s];
                let ph = &phase[i][s];
                let h_end = C64::from_polar(1.0, -ph[n - 1]);
                let c = (a[0] - a[n - 1]) / (C64::new(1.0, 0.0) - h_end);
                let p: Vec<C64> = (0..n - 1).map(|j| a[j] - c * C64::from_polar(1.0, -ph[j])).collect();
                coeffs[i][s] = (-(kmax as i64)..=kmax as i64)
                    .map(|k| {
                        let sum: C64 = p
                            .iter()
                            .zip(&self.times)
                            .map(|(&v, &t)| v * C64::from_polar(1.0, -2.0 * PI * k as f64 * w * t))
                            .sum();
                        sum / (n - 1) as f64
                    })
                    .collect();
            }
        }
        Ok(FourierAlpha { kmax, lambda, omega_phi: w, coeffs })
    }
}

/// ᾱ_{i,s}(k) for |k| ≤ kmax.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierAlpha {
    pub kmax: usize,
    /// λ = δ d1 / ν_Φ.
    pub lambda: f64,
    pub omega_phi: f64,
    pub coeffs: [[Vec<C64>; 2]; 2],
}

impl FourierAlpha {
    pub fn coeff(&self, qubit: usize, sign: Sign, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.kmax {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[qubit - 1][sign.index()][(k + self.kmax as i64) as usize]
    }

    /// Evaluate Σ_k ᾱ(k) e^{2πikν_Φt}.
    pub fn eval(&self, qubit: usize, sign: Sign, t: f64) -> C64 {
        (-(self.kmax as i64)..=self.kmax as i64)
            .map(|k| self.coeff(qubit, sign, k) * C64::from_polar(1.0, 2.0 * PI * k as f64 * self.omega_phi * t))
            .sum()
    }
}

fn lambda_of(device: &DeviceSpec, pulse: &FluxPulse) -> Result<f64> {
    if pulse.omega_phi == 0.0 {
        return Ok(0.0);
    }
    Ok(pulse.delta * transfer_expansion(device, pulse.theta)?.d1 / pulse.omega_phi)
}

/// Lagrange weights A[j][m] = ∫_{x_j}^1 L_m(x) dx on the 5 Gauss–Legendre nodes of [0, 1].
fn tail_weights() -> &'static [[f64; 5]; 5] {
    static W: OnceLock<[[f64; 5]; 5]> = OnceLock::new();
    W.get_or_init(|| {
        let lag = |m: usize, x: f64| {
            (0..5).filter(|&q| q != m).map(|q| (x - GL5_NODES[q]) / (GL5_NODES[m] - GL5_NODES[q])).product::<f64>()
        };
        let mut a = [[0.0; 5]; 5];
        for j in 0..5 {
            let lo = GL5_NODES[j];
            let len = 1.0 - lo;
            for m in 0..5 {
                a[j][m] = len * (0..5).map(|q| GL5_WEIGHTS[q] * lag(m, lo + len * GL5_NODES[q])).sum::<f64>();
            }
        }
        a
    })
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("t_grid", "must not be empty"));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("t_grid", "must be finite"));
    }
    if grid.len() == 1 {
        return Ok(0.0);
    }
    let dt = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::invalid("t_grid", "must be strictly increasing"));
    }
    for (k, &t) in grid.iter().enumerate() {
        if (t - (grid[0] + k as f64 * dt)).abs() > 1e-9 * (1.0 + dt * k as f64) {
            return Err(Error::invalid("t_grid", "must be uniform"));
        }
    }
    Ok(dt)
}

/// Numerical solution of i α̇ + 2π g − 2π Δ(t) α = 0 with α(t0) = g/Δ(t0).
///
/// Each substep solves the linear ODE through its variation-of-constants form; the phase
/// integrals use the quartic interpolant of Δ through the Gauss–Legendre nodes, so the
/// step error stays small even for |Δ| ~ 10 GHz.
pub fn solve_alpha_ode(
    device: &DeviceSpec,
    pulse: &FluxPulse,
    transfer: Transfer,
    t_grid: &[f64],
    opts: &AlphaOptions,
) -> Result<AlphaSolution> {
    device.validate()?;
    pulse.validate()?;
    opts.validate()?;
    let dt = check_uniform(t_grid)?;
    let drive = CouplerDrive::new(device, pulse, transfer)?;
    let n = t_grid.len();
    let nu = [device.q1.frequency, device.q2.frequency];
    let g = [device.g1, device.g2];
    let signs = [Sign::Minus, Sign::Plus];
    let tail = tail_weights();

    let mut alpha: [[Vec<C64>; 2]; 2] = Default::default();
    let mut detuning: [[Vec<f64>; 2]; 2] = Default::default();
    let mut phase: [[Vec<f64>; 2]; 2] = Default::default();
    let mut state = [[C64::new(0.0, 0.0); 2]; 2];
    let mut acc = [[0.0f64; 2]; 2];
    let nc0 = drive.at(t_grid[0]);
    for i in 0..2 {
        for s in 0..2 {
            let d = nu[i] + signs[s].value() * nc0;
            state[i][s] = C64::new(g[i] / d, 0.0);
            alpha[i][s] = Vec::with_capacity(n);
            detuning[i][s] = Vec::with_capacity(n);
            phase[i][s] = Vec::with_capacity(n);
        }
    }
    let record = |alpha: &mut [[Vec<C64>; 2]; 2],
                  detuning: &mut [[Vec<f64>; 2]; 2],
                  phase: &mut [[Vec<f64>; 2]; 2],
                  state: &[[C64; 2]; 2],
                  acc: &[[f64; 2]; 2],
                  nc: f64| {
        for i in 0..2 {
            for s in 0..2 {
                alpha[i][s].push(state[i][s]);
                detuning[i][s].push(nu[i] + signs[s].value() * nc);
                phase[i][s].push(acc[i][s]);
            }
        }
    };
    record(&mut alpha, &mut detuning, &mut phase, &state, &acc, nc0);

    let sub = if n > 1 { (dt / opts.substep).ceil().max(1.0) as usize } else { 0 };
    let h = if sub > 0 { dt / sub as f64 } else { 0.0 };
    let mut nodes = [0.0f64; 5];
    for k in 1..n {
        let a = t_grid[0] + (k - 1) as f64 * dt;
        for q in 0..sub {
            let ts = a + q as f64 * h;
            for (m, x) in GL5_NODES.iter().enumerate() {
                nodes[m] = drive.at(ts + x * h);
            }
            for i in 0..2 {
                for s in 0..2 {
                    let sv = signs[s].value();
                    let del: [f64; 5] = std::array::from_fn(|m| nu[i] + sv * nodes[m]);
                    let total = 2.0 * PI * h * (0..5).map(|m| GL5_WEIGHTS[m] * del[m]).sum::<f64>();
                    let mut forcing = C64::new(0.0, 0.0);
                    for j in 0..5 {
                        let phi = 2.0 * PI * h * (0..5).map(|m| tail[j][m] * del[m]).sum::<f64>();
                        forcing += GL5_WEIGHTS[j] * C64::from_polar(1.0, -phi);
                    }
                    state[i][s] = state[i][s] * C64::from_polar(1.0, -total)
                        + C64::new(0.0, 2.0 * PI * g[i] * h) * forcing;
                    acc[i][s] += total;
                }
            }
        }
        let nc = drive.at(t_grid[k]);
        record(&mut alpha, &mut detuning, &mut phase, &state, &acc, nc);
    }

    let mut sol = AlphaSolution {
        times: t_grid.to_vec(),
        alpha,
        detuning,
        phase: Some(phase),
        pulse: pulse.clone(),
        device: device.clone(),
        solver: AlphaSolver::Ode,
        residual: None,
        sideband: sideband_hit(device, pulse.theta, pulse.omega_phi, opts.sideband_guard, opts.sideband_orders),
    };
    sol.residual = ode_residual(&sol, dt);
    if let Some(r) = sol.residual {
        if r > opts.residual_tol {
            return Err(Error::AlphaResidual { residual: r, tol: opts.residual_tol });
        }
    }
    Ok(sol)
}

/// max |α̇/(2π) − i(g − Δα)| / max g from sixth-order central differences, or None when the
/// grid is too coarse for the differences to resolve the fastest phase.
fn ode_residual(sol: &AlphaSolution, dt: f64) -> Option<f64> {
    let n = sol.times.len();
    let gmax = sol.device.g1.abs().max(sol.device.g2.abs());
    if n < 7 || gmax == 0.0 {
        return None;
    }
    let fastest = sol.detuning.iter().flatten().flatten().fold(0.0f64, |m, d| m.max(d.abs()));
    if 2.0 * PI * fastest * dt > 0.08 {
        return None;
    }
    let g = [sol.device.g1, sol.device.g2];
    let c = [1.0 / 60.0, -3.0 / 20.0, 3.0 / 4.0];
    let mut worst = 0.0f64;
    for i in 0..2 {
        for s in 0..2 {
            let a = &sol.alpha[i][s];
            let d = &sol.detuning[i][s];
            for k in 3..n - 3 {
                let deriv = (c[2] * (a[k + 1] - a[k - 1]) + c[1] * (a[k + 2] - a[k - 2]) + c[0] * (a[k + 3] - a[k - 3]))
                    / dt;
                let r = deriv / (2.0 * PI) - C64::new(0.0, 1.0) * (g[i] - d[k] * a[k]);
                worst = worst.max(r.norm());
            }
        }
    }
    Some(worst / gmax)
}

/// Uniform grid covering `periods` modulation periods with `per_period` intervals each.
pub fn periodic_grid(omega_phi: f64, periods: usize, per_period: usize) -> Result<Vec<f64>> {
    if !(omega_phi > 0.0) || periods == 0 || per_period == 0 {
        return Err(Error::invalid("grid", "needs positive omega_phi, periods and samples"));
    }
    let dt = 1.0 / (omega_phi * per_period as f64);
    Ok((0..=periods * per_period).map(|k| k as f64 * dt).collect())
}

fn first_order_check(device: &DeviceSpec, pulse: &FluxPulse, guard: f64, orders: u32) -> Result<()> {
    device.validate()?;
    pulse.validate()?;
    if let Some(hit) = sideband_hit(device, pulse.theta, pulse.omega_phi, guard, orders) {
        return Err(sideband_error(hit, pulse.omega_phi, guard));
    }
    Ok(())
}

/// Jacobi–Anger series for ᾱ_{i,s}(k), exact for a first-order transfer function:
/// ᾱ(k) = g Σ_{|n|≤nint} J_{k−n}(−sλ) J_n(sλ) / (nν_Φ + Δ^θ).
pub fn bessel_alpha(
    device: &DeviceSpec,
    pulse: &FluxPulse,
    kmax: usize,
    nint: usize,
    opts: &AlphaOptions,
) -> Result<FourierAlpha> {
    first_order_check(device, pulse, opts.sideband_guard, opts.sideband_orders)?;
    let lambda = lambda_of(device, pulse)?;
    let w = pulse.omega_phi;
    let top = kmax + nint;
    let jl = bessel_j_sequence(top, lambda.abs());
    // J_m(x) for signed m and x = ±|λ|.
    let j = |m: i64, x_sign: f64| {
        let a = m.unsigned_abs() as usize;
        if a > top {
            return 0.0;
        }
        let odd = a % 2 == 1;
        let mut v = jl[a];
        if odd && m < 0 {
            v = -v;
        }
        if odd && x_sign * lambda.signum() < 0.0 {
            v = -v;
        }
        v
    };
    let mut coeffs: [[Vec<C64>; 2]; 2] = Default::default();
    for qubit in [1, 2] {
        let g = device.g(qubit);
        for sign in [Sign::Minus, Sign::Plus] {
            let s = sign.value();
            let d = static_detuning(device, pulse.theta, qubit, sign);
            coeffs[qubit - 1][sign.index()] = (-(kmax as i64)..=kmax as i64)
                .map(|k| {
                    let v: f64 = (-(nint as i64)..=nint as i64)
                        .map(|n| j(k - n, -s) * j(n, s) / (n as f64 * w + d))
                        .sum();
                    C64::new(g * v, 0.0)
                })
                .collect();
        }
    }
    Ok(FourierAlpha { kmax, lambda, omega_phi: w, coeffs })
}

/// Integration constant C_{i,s}(t) that joins the periodic series onto α(0) = g/Δ(0):
/// C(t) = g Σ_m e^{2πi(mν_Φ − Δ^θ)t} J_m(−sλ) (1/Δ(0) − Σ_n J_n(sλ)/(nν_Φ + Δ^θ)),
/// where Δ(0) includes the modulation present at t = 0 (first-order transfer).
pub fn integration_constant(
    device: &DeviceSpec,
    pulse: &FluxPulse,
    qubit: usize,
    sign: Sign,
    t_grid: &[f64],
    nint: usize,
    opts: &AlphaOptions,
) -> Result<Vec<C64>> {
    first_order_check(device, pulse, opts.sideband_guard, opts.sideband_orders)?;
    if qubit != 1 && qubit != 2 {
        return Err(Error::invalid("qubit", "must be 1 or 2"));
    }
    let lambda = lambda_of(device, pulse)?;
    let s = sign.value();
    let w = pulse.omega_phi;
    let g = device.g(qubit);
    let d = static_detuning(device, pulse.theta, qubit, sign);
    let jl = bessel_j_sequence(nint, lambda.abs());
    let j = |m: i64, x: f64| {
        let a = m.unsigned_abs() as usize;
        let odd = a % 2 == 1;
        let flip = odd && ((m < 0) != (x < 0.0));
        if flip {
            -jl[a]
        } else {
            jl[a]
        }
    };
    let sl = s * lambda;
    let d_start = d + s * transfer_expansion(device, pulse.theta)?.d1 * pulse.modulation(0.0);
    let bracket = 1.0 / d_start - (-(nint as i64)..=nint as i64).map(|n| j(n, sl) / (n as f64 * w + d)).sum::<f64>();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let sum: C64 = (-(nint as i64)..=nint as i64)
                .map(|m| j(m, -sl) * C64::from_polar(1.0, 2.0 * PI * (m as f64 * w - d) * t))
                .sum();
            g * bracket * sum
        })
        .collect())
}

/// Adiabatic amplitudes α = g/Δ(t).
pub fn adiabatic_alpha(
    device: &DeviceSpec,
    pulse: &FluxPulse,
    transfer: Transfer,
    t_grid: &[f64],
) -> Result<AlphaSolution> {
    device.validate()?;
    pulse.validate()?;
    check_uniform(t_grid)?;
    let drive = CouplerDrive::new(device, pulse, transfer)?;
    let mut alpha: [[Vec<C64>; 2]; 2] = Default::default();
    let mut detuning: [[Vec<f64>; 2]; 2] = Default::default();
    for qubit in [1, 2] {
        for sign in [Sign::Minus, Sign::Plus] {
            let d: Vec<f64> = t_grid
                .iter()
                .map(|&t| device.qubit(qubit).frequency + sign.value() * drive.at(t))
                .collect();
            alpha[qubit - 1][sign.index()] = d.iter().map(|&x| C64::new(device.g(qubit) / x, 0.0)).collect();
            detuning[qubit - 1][sign.index()] = d;
        }
    }
    Ok(AlphaSolution {
        times: t_grid.to_vec(),
        alpha,
        detuning,
        phase: None,
        pulse: pulse.clone(),
        device: device.clone(),
        solver: AlphaSolver::Adiabatic,
        residual: None,
        sideband: None,
    })
}

/// Sample a Jacobi–Anger series onto a grid as an AlphaSolution (first-order transfer).
pub fn bessel_solution(fa: &FourierAlpha, device: &DeviceSpec, pulse: &FluxPulse, t_grid: &[f64]) -> Result<AlphaSolution> {
    check_uniform(t_grid)?;
    let drive = CouplerDrive::new(device, pulse, Transfer::FirstOrder)?;
    let mut alpha: [[Vec<C64>; 2]; 2] = Default::default();
    let mut detuning: [[Vec<f64>; 2]; 2] = Default::default();
    for qubit in [1, 2] {
        for sign in [Sign::Minus, Sign::Plus] {
            alpha[qubit - 1][sign.index()] = t_grid.iter().map(|&t| fa.eval(qubit, sign, t)).collect();
            detuning[qubit - 1][sign.index()] =
                t_grid.iter().map(|&t| device.qubit(qubit).frequency + sign.value() * drive.at(t)).collect();
        }
    }
    Ok(AlphaSolution {
        times: t_grid.to_vec(),
        alpha,
        detuning,
        phase: None,
        pulse: pulse.clone(),
        device: device.clone(),
        solver: AlphaSolver::Bessel,
        residual: None,
        sideband: None,
    })
}
