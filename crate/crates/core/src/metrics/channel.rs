//! Computational-subspace channels reconstructed from circuit dynamics.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceSpec, FluxPulse, Transfer};
use crate::dynamics::{evolve_density_batch, propagate_columns, DissipationRates, Dissipator, PropagationOptions};
use crate::error::{Error, Result};
use crate::hamiltonian::{circuit_hamiltonian, HilbertConfig};
use crate::linalg::trace;
use crate::spectroscopy::{Frame, Readout};

const D: usize = 4;

/// Linear map on 4×4 density matrices as a 16×16 superoperator:
/// `superop[[4a + b, 4m + n]] = E(|m⟩⟨n|)[a, b]`.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    pub superop: Array2<C64>,
    /// Mean population outside the computational subspace at the end, over the four
    /// computational basis inputs.
    pub leakage: f64,
    pub gate_time: f64,
    pub pulse: Option<FluxPulse>,
}

impl QuantumChannel {
    pub fn from_superop(superop: Array2<C64>) -> Self {
        QuantumChannel { superop, leakage: 0.0, gate_time: 0.0, pulse: None }
    }

    pub fn identity() -> Self {
        Self::from_superop(Array2::eye(D * D))
    }

    /// ρ ↦ UρU† for a 4×4 (possibly sub-unitary) matrix.
    pub fn from_unitary(u: &Array2<C64>) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    pub fn from_kraus(ops: &[Array2<C64>]) -> Self {
        let mut s = Array2::zeros((D * D, D * D));
        for k in ops {
            for a in 0..D {
                for b in 0..D {
                    for m in 0..D {
                        for n in 0..D {
                            s[[D * a + b, D * m + n]] += k[[a, m]] * k[[b, n]].conj();
                        }
                    }
                }
            }
        }
        Self::from_superop(s)
    }

    /// ρ ↦ (1 − p)ρ + p·Tr(ρ)·I/4.
    pub fn depolarizing(p: f64) -> Self {
        let mut s: Array2<C64> = Array2::eye(D * D) * C64::new(1.0 - p, 0.0);
        for m in 0..D {
            for a in 0..D {
                s[[D * a + a, D * m + m]] += C64::new(p / D as f64, 0.0);
            }
        }
        Self::from_superop(s)
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let v = Array1::from_iter(rho.iter().copied());
        let out = self.superop.dot(&v);
        Array2::from_shape_vec((D, D), out.to_vec()).expect("4×4")
    }

    /// Tr E(I); equals 4 for a trace-preserving map.
    pub fn trace_of_identity(&self) -> f64 {
        (0..D).map(|m| (0..D).map(|a| self.superop[[D * a + a, D * m + m]].re).sum::<f64>()).sum()
    }

    /// Largest deviation of E(X)† from E(X†) over the matrix units.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..D {
            for n in 0..D {
                for a in 0..D {
                    for b in 0..D {
                        let x = self.superop[[D * a + b, D * m + n]];
                        let y = self.superop[[D * b + a, D * n + m]].conj();
                        worst = worst.max((x - y).norm());
                    }
                }
            }
        }
        worst
    }

    /// Trace preservation up to the leaked population.
    pub fn check_trace(&self, tol: f64) -> Result<()> {
        let deviation = (D as f64 - self.trace_of_identity()) / D as f64;
        if (deviation - self.leakage).abs() > tol {
            return Err(Error::NotTracePreserving { deviation, leakage: self.leakage });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelOptions {
    pub transfer: Transfer,
    pub readout: Readout,
    pub propagation: PropagationOptions,
}

/// Computational readout vectors |v_00⟩, |v_01⟩, |v_10⟩, |v_11⟩ (coupler in its ground state).
fn computational_vectors(frame: &Frame) -> [Array1<C64>; 4] {
    let idx = frame.basis.computational();
    std::array::from_fn(|k| frame.state(idx[k]))
}

/// Closed-system channel from the 4×4 block of the propagator, plus leakage.
pub fn unitary_channel(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    pulse: &FluxPulse,
    opts: &ChannelOptions,
) -> Result<QuantumChannel> {
    pulse.validate()?;
    let frame = Frame::new(device, hilbert, pulse.theta, opts.readout)?;
    let vs = computational_vectors(&frame);
    let dim = frame.basis.dim();
    let mut cols = Array2::zeros((dim, D));
    for (k, v) in vs.iter().enumerate() {
        cols.column_mut(k).assign(v);
    }
    let ham = circuit_hamiltonian(device, hilbert, pulse, opts.transfer)?;
    let out = propagate_columns(&ham, cols, &[0.0, pulse.duration], &opts.propagation)?;
    let psi = out.last().expect("two samples");
    let mut u = Array2::zeros((D, D));
    for a in 0..D {
        for m in 0..D {
            u[[a, m]] = vs[a].iter().zip(psi.column(m)).map(|(x, y)| x.conj() * y).sum::<C64>();
        }
    }
    let leakage = (0..D).map(|m| 1.0 - (0..D).map(|a| u[[a, m]].norm_sqr()).sum::<f64>()).sum::<f64>() / D as f64;
    let mut ch = QuantumChannel::from_unitary(&u);
    ch.leakage = leakage.max(0.0);
    ch.gate_time = pulse.duration;
    ch.pulse = Some(*pulse);
    Ok(ch)
}

/// Propagates the 16 matrix units |v_m⟩⟨v_n| through the Lindblad equation and projects the
/// results onto the computational subspace. Without dissipation this reduces to
/// [`unitary_channel`], which is used instead.
pub fn reconstruct_channel(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    pulse: &FluxPulse,
    rates: &DissipationRates,
    opts: &ChannelOptions,
) -> Result<QuantumChannel> {
    if rates.is_zero() {
        return unitary_channel(device, hilbert, pulse, opts);
    }
    pulse.validate()?;
    opts.propagation.validate()?;
    let frame = Frame::new(device, hilbert, pulse.theta, opts.readout)?;
    let vs = computational_vectors(&frame);
    let ham = circuit_hamiltonian(device, hilbert, pulse, opts.transfer)?;
    let diss = Dissipator::for_circuit(hilbert, rates)?;
    let dim = frame.basis.dim();
    let outer = |m: usize, n: usize| {
        let mut r = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                r[[i, j]] = vs[m][i] * vs[n][j].conj();
            }
        }
        r
    };
    // One batch per input row m, evolved in parallel.
    let finals: Vec<Vec<Array2<C64>>> = (0..D)
        .into_par_iter()
        .map(|m| {
            let batch: Vec<Array2<C64>> = (0..D).map(|n| outer(m, n)).collect();
            let mut sink = |_: usize, _: &[Array2<C64>]| {};
            evolve_density_batch(&ham, batch, &diss, 0.0, &[pulse.duration], &opts.propagation, &mut sink)
        })
        .collect();
    let mut superop = Array2::zeros((D * D, D * D));
    let mut leakage = 0.0;
    for m in 0..D {
        for n in 0..D {
            let rho = &finals[m][n];
            let tr = trace(rho);
            let want = if m == n { 1.0 } else { 0.0 };
            let drift = (tr - C64::new(want, 0.0)).norm();
            if !(drift <= opts.propagation.norm_tol) {
                return Err(Error::NormDrift { what: "density-matrix trace", drift, tol: opts.propagation.norm_tol });
            }
            let rv: Vec<Array1<C64>> = vs.iter().map(|v| rho.dot(v)).collect();
            for a in 0..D {
                for b in 0..D {
                    superop[[D * a + b, D * m + n]] = vs[a].iter().zip(rv[b].iter()).map(|(x, y)| x.conj() * y).sum::<C64>();
                }
            }
            if m == n {
                leakage += 1.0 - (0..D).map(|a| superop[[D * a + a, D * m + m]].re).sum::<f64>();
            }
        }
    }
    let ch = QuantumChannel { superop, leakage: (leakage / D as f64).max(0.0), gate_time: pulse.duration, pulse: Some(*pulse) };
    if ch.hermiticity_defect() > 1e-8 {
        return Err(Error::NonPhysicalChannel(format!("hermiticity defect {:.3e}", ch.hermiticity_defect())));
    }
    Ok(ch)
}
