//! Haar-average gate fidelity of computational-subspace channels.

use std::f64::consts::PI;

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::channel::QuantumChannel;
use crate::effective::Gate;
use crate::error::{Error, Result};
use crate::linalg::{dagger, kron, solve, trace};
use crate::optim::brent_minimize;

const D: usize = 4;

fn pauli(k: usize) -> Array2<C64> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => array![[o, z], [z, o]],
        1 => array![[z, o], [o, z]],
        2 => array![[z, -i], [i, z]],
        _ => array![[o, z], [z, -o]],
    }
}

/// The 16 two-qubit Pauli products σ_a ⊗ σ_b, qubit 1 first.
pub fn pauli_basis() -> Vec<Array2<C64>> {
    (0..16).map(|j| kron(&pauli(j / 4), &pauli(j % 4))).collect()
}

/// F = [Σ_j Tr(U P_j† U† E(P_j)) + d·Tr E(I)] / (d²(d+1)). For trace-preserving E the last
/// term is d², the usual 2-design expression; the general form keeps the identity exact when
/// population leaks out of the subspace.
pub fn average_fidelity(channel: &QuantumChannel, ideal: &Array2<C64>) -> Result<f64> {
    let ud = dagger(ideal);
    let mut sum = C64::new(0.0, 0.0);
    for p in pauli_basis() {
        let ep = channel.apply(&p);
        sum += trace(&ideal.dot(&dagger(&p)).dot(&ud).dot(&ep));
    }
    let d = D as f64;
    let f = (sum.re + d * channel.trace_of_identity()) / (d * d * (d + 1.0));
    if !f.is_finite() || f > 1.0 + 1e-6 || f < -1e-6 || sum.im.abs() > 1e-6 {
        return Err(Error::NonPhysicalChannel(format!(
            "average fidelity {f:.9} (imaginary part {:.3e}, Tr E(I) = {:.9}, hermiticity defect {:.3e})",
            sum.im,
            channel.trace_of_identity(),
            channel.hermiticity_defect()
        )));
    }
    Ok(f)
}

/// Direct Monte Carlo over Haar-random pure states. Returns (mean, standard error).
pub fn haar_fidelity_mc(channel: &QuantumChannel, ideal: &Array2<C64>, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ud = dagger(ideal);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let mut psi: Vec<C64> =
            (0..D).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        let rho = Array2::from_shape_fn((D, D), |(i, j)| psi[i] * psi[j].conj());
        let out = ud.dot(&channel.apply(&rho)).dot(ideal);
        let f: f64 = (0..D).flat_map(|i| (0..D).map(move |j| (i, j))).map(|(i, j)| (psi[i].conj() * out[[i, j]] * psi[j]).re).sum();
        sum += f;
        sum2 += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Frame corrections applied after the ideal gate before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    None,
    /// Two single-qubit virtual-Z angles.
    #[default]
    LocalZ,
    /// Local Z angles plus a controlled-phase angle on |11⟩.
    LocalZAndConditionalPhase,
}

/// diag(1, e^{ib}, e^{ia}, e^{i(a+b+c)}) on |00⟩, |01⟩, |10⟩, |11⟩ for angles [a, b, c].
pub fn phase_correction(angles: [f64; 3]) -> Array2<C64> {
    let [a, b, c] = angles;
    let mut z = Array2::zeros((D, D));
    z[[0, 0]] = C64::new(1.0, 0.0);
    z[[1, 1]] = C64::from_polar(1.0, b);
    z[[2, 2]] = C64::from_polar(1.0, a);
    z[[3, 3]] = C64::from_polar(1.0, a + b + c);
    z
}

/// Maximizes F over the frame angles allowed by `mode`: coarse grid, then cyclic Brent sweeps.
pub fn optimize_phases(channel: &QuantumChannel, ideal: &Array2<C64>, mode: Compensation) -> Result<([f64; 3], f64)> {
    let nfree = match mode {
        Compensation::None => 0,
        Compensation::LocalZ => 2,
        Compensation::LocalZAndConditionalPhase => 3,
    };
    let eval = |x: [f64; 3]| average_fidelity(channel, &phase_correction(x).dot(ideal));
    let mut best = [0.0; 3];
    let mut fbest = eval(best)?;
    if nfree == 0 {
        return Ok((best, fbest));
    }
    let n: usize = if nfree == 2 { 24 } else { 12 };
    let step = 2.0 * PI / n as f64;
    let total = n.pow(nfree as u32);
    for idx in 0..total {
        let mut x = [0.0; 3];
        let mut r = idx;
        for v in x.iter_mut().take(nfree) {
            *v = (r % n) as f64 * step;
            r /= n;
        }
        let f = eval(x)?;
        if f > fbest {
            fbest = f;
            best = x;
        }
    }
    for _ in 0..20 {
        let before = fbest;
        for k in 0..nfree {
            let mut trial = best;
            let (xk, neg) = brent_minimize(
                |v| {
                    trial[k] = v;
                    eval(trial).map(|f| -f).unwrap_or(f64::INFINITY)
                },
                best[k] - step,
                best[k] + step,
                1e-10,
                200,
            );
            if -neg >= fbest {
                fbest = -neg;
                best[k] = xk;
            }
        }
        if fbest - before < 1e-13 {
            break;
        }
    }
    // Coordinate sweeps crawl along coupled angle combinations; finish with damped Newton
    // steps on finite-difference derivatives (F is smooth and quadratic near the optimum).
    let h = 1e-3;
    for _ in 0..8 {
        let at = |dx: &[(usize, f64)]| {
            let mut x = best;
            for &(k, s) in dx {
                x[k] += s;
            }
            eval(x).unwrap_or(f64::NEG_INFINITY)
        };
        let mut grad = vec![0.0; nfree];
        let mut hess = Array2::<f64>::zeros((nfree, nfree));
        for i in 0..nfree {
            grad[i] = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
            for j in 0..nfree {
                hess[[i, j]] = if i == j {
                    (at(&[(i, h)]) - 2.0 * fbest + at(&[(i, -h)])) / (h * h)
                } else {
                    (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)]) + at(&[(i, -h), (j, -h)]))
                        / (4.0 * h * h)
                };
            }
        }
        let scale = hess.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-12);
        let mut a = -hess;
        for i in 0..nfree {
            a[[i, i]] += 1e-6 * scale;
        }
        let Some(step) = solve(&a, &grad) else { break };
        let mut trial = best;
        for k in 0..nfree {
            trial[k] += step[k];
        }
        match eval(trial) {
            Ok(f) if f > fbest => {
                let gain = f - fbest;
                best = trial;
                fbest = f;
                if gain < 1e-15 {
                    break;
                }
            }
            _ => break,
        }
    }
    for v in best.iter_mut() {
        *v = v.rem_euclid(2.0 * PI);
    }
    Ok((best, eval(best)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub gate: Gate,
    pub delta: f64,
    pub omega_phi: f64,
    /// ns.
    pub gate_time: f64,
    pub fidelity: f64,
    pub error: f64,
    pub leakage: f64,
    /// Applied frame angles [a, b, c] (radians).
    pub phases: [f64; 3],
}

/// Fidelity of `channel` against the gate's π/2 rotation, after the allowed frame corrections.
pub fn fidelity_report(channel: &QuantumChannel, gate: Gate, mode: Compensation) -> Result<FidelityReport> {
    let ideal = gate.ideal_unitary(PI / 2.0);
    let (phases, fidelity) = optimize_phases(channel, &ideal, mode)?;
    let pulse = channel.pulse;
    Ok(FidelityReport {
        gate,
        delta: pulse.map_or(0.0, |p| p.delta),
        omega_phi: pulse.map_or(0.0, |p| p.omega_phi),
        gate_time: channel.gate_time,
        fidelity,
        error: 1.0 - fidelity,
        leakage: channel.leakage,
        phases,
    })
}
