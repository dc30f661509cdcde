//! Truncated-boson operators and the three-transmon circuit Hamiltonian.
//!
//! Matrices representing Hamiltonians are in rad/ns. The trace mean is removed.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::device::{coupler_frequency, CouplerCurve, DeviceSpec, FluxPulse, Transfer};
use crate::error::{Error, Result};
use crate::linalg::{kron, sym_eigh};

pub const DEFAULT_MAX_DIM: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertConfig {
    #[serde(default = "three")]
    pub levels_q1: usize,
    #[serde(default = "three")]
    pub levels_q2: usize,
    #[serde(default = "three")]
    pub levels_c: usize,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn three() -> usize {
    3
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

impl Default for HilbertConfig {
    fn default() -> Self {
        HilbertConfig::uniform(3)
    }
}

impl HilbertConfig {
    pub fn uniform(levels: usize) -> Self {
        HilbertConfig { levels_q1: levels, levels_q2: levels, levels_c: levels, max_dim: DEFAULT_MAX_DIM }
    }

    pub fn new(levels_q1: usize, levels_q2: usize, levels_c: usize) -> Self {
        HilbertConfig { levels_q1, levels_q2, levels_c, max_dim: DEFAULT_MAX_DIM }
    }

    pub fn levels(&self) -> [usize; 3] {
        [self.levels_q1, self.levels_q2, self.levels_c]
    }

    pub fn dim(&self) -> usize {
        self.levels_q1 * self.levels_q2 * self.levels_c
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("levels_q1", self.levels_q1), ("levels_q2", self.levels_q2), ("levels_c", self.levels_c)] {
            if l < 2 {
                return Err(Error::invalid(&format!("hilbert.{name}"), "at least 2 levels required"));
            }
        }
        let dim = self.dim();
        if dim > self.max_dim {
            return Err(Error::DimensionTooLarge { dim, max: self.max_dim });
        }
        Ok(())
    }
}

/// Occupation triple (n1, n2, nc).
pub type Label = [usize; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledBasis {
    levels: [usize; 3],
}

impl LabeledBasis {
    pub fn new(config: &HilbertConfig) -> Self {
        LabeledBasis { levels: config.levels() }
    }

    pub fn levels(&self) -> [usize; 3] {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn index(&self, label: Label) -> Result<usize> {
        let [l1, l2, lc] = self.levels;
        if label[0] >= l1 || label[1] >= l2 || label[2] >= lc {
            return Err(Error::UnknownLabel(label_string(label)));
        }
        Ok((label[0] * l2 + label[1]) * lc + label[2])
    }

    pub fn label(&self, index: usize) -> Label {
        let [_, l2, lc] = self.levels;
        [index / (l2 * lc), (index / lc) % l2, index % lc]
    }

    /// Parse a label written as three digits, e.g. "100", or comma separated, e.g. "1,0,0".
    pub fn parse(&self, s: &str) -> Result<usize> {
        let s = s.trim().trim_start_matches('|').trim_end_matches('>').trim_end_matches('⟩');
        let parts: Option<Vec<usize>> = if s.contains(',') {
            s.split(',').map(|p| p.trim().parse().ok()).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
        };
        let parts = parts.ok_or_else(|| Error::UnknownLabel(s.to_string()))?;
        if parts.len() != 3 {
            return Err(Error::UnknownLabel(s.to_string()));
        }
        self.index([parts[0], parts[1], parts[2]])
    }

    /// Number operator diagonals of the three transmons.
    pub fn occupations(&self, which: usize) -> Vec<usize> {
        (0..self.dim()).map(|k| self.label(k)[which]).collect()
    }

    /// Indices of the computational states |n1 n2 0⟩ with n1, n2 ∈ {0, 1}, ordered 00, 01, 10, 11.
    pub fn computational(&self) -> [usize; 4] {
        let idx = |a, b| self.index([a, b, 0]).expect("at least two levels per qubit");
        [idx(0, 0), idx(0, 1), idx(1, 0), idx(1, 1)]
    }
}

pub fn label_string(label: Label) -> String {
    if label.iter().all(|&n| n < 10) {
        format!("{}{}{}", label[0], label[1], label[2])
    } else {
        format!("{},{},{}", label[0], label[1], label[2])
    }
}

fn local_lowering(n: usize) -> Array2<C64> {
    let mut a = Array2::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

/// Lowering operators a_1, a_2, a_c embedded in the full space.
pub fn build_operators(config: &HilbertConfig) -> Result<[Array2<C64>; 3]> {
    config.validate()?;
    let [l1, l2, lc] = config.levels();
    let e = |n: usize| Array2::<C64>::eye(n);
    Ok([
        kron(&kron(&local_lowering(l1), &e(l2)), &e(lc)),
        kron(&kron(&e(l1), &local_lowering(l2)), &e(lc)),
        kron(&kron(&e(l1), &e(l2)), &local_lowering(lc)),
    ])
}

/// H(t) = D(t) + V with D diagonal, D_k(t) = base_k + weight_k·ν_c(t), and V constant and real.
///
/// ν_c(t) is the coupler frequency in GHz produced by the pulse through the transfer model.
#[derive(Debug, Clone)]
pub struct SplitHamiltonian {
    pub base: Vec<f64>,
    pub weights: Vec<f64>,
    pub coupling: Array2<f64>,
    pub drive: CouplerDrive,
}

#[derive(Debug, Clone, Copy)]
pub struct CouplerDrive {
    pub pulse: FluxPulse,
    pub curve: CouplerCurve,
}

impl CouplerDrive {
    pub fn new(device: &DeviceSpec, pulse: &FluxPulse, transfer: Transfer) -> Result<Self> {
        Ok(CouplerDrive { pulse: *pulse, curve: CouplerCurve::new(device, pulse.theta, transfer)? })
    }

    /// Coupler frequency in GHz; E(t) = 0 outside the window, so this is ν_c(θ) there.
    pub fn at(&self, t: f64) -> f64 {
        self.curve.at(self.pulse.modulation(t))
    }

    pub fn is_static(&self) -> bool {
        self.pulse.delta == 0.0
    }
}

impl SplitHamiltonian {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn diagonal_at(&self, t: f64) -> Array1<f64> {
        let f = self.drive.at(t);
        self.base.iter().zip(&self.weights).map(|(b, w)| b + w * f).collect()
    }

    pub fn matrix_at(&self, t: f64) -> Array2<C64> {
        let mut h = self.coupling.mapv(|x| C64::new(x, 0.0));
        for (k, d) in self.diagonal_at(t).iter().enumerate() {
            h[[k, k]] += d;
        }
        h
    }

    /// Real symmetric matrix at fixed coupler frequency (GHz).
    pub fn static_matrix(&self, coupler_ghz: f64) -> Array2<f64> {
        let mut h = self.coupling.clone();
        for k in 0..self.dim() {
            h[[k, k]] += self.base[k] + self.weights[k] * coupler_ghz;
        }
        h
    }

    /// Largest transition frequency (GHz) between states connected by the coupling,
    /// over the range of coupler frequencies the pulse can reach.
    pub fn max_transition_frequency(&self) -> f64 {
        let n = self.dim();
        let delta = self.drive.pulse.delta;
        let mut m: f64 = 0.0;
        for f in [self.drive.curve.at(-delta), self.drive.curve.at(0.0), self.drive.curve.at(delta)] {
            let d: Vec<f64> = self.base.iter().zip(&self.weights).map(|(b, w)| b + w * f).collect();
            for i in 0..n {
                for j in 0..n {
                    if self.coupling[[i, j]] != 0.0 {
                        m = m.max((d[i] - d[j]).abs());
                    }
                }
            }
        }
        m / (2.0 * PI)
    }
}

fn level_energy(nu: f64, u: f64, n: usize) -> f64 {
    let n = n as f64;
    nu * n + 0.5 * u * n * (n - 1.0)
}

/// Circuit Hamiltonian in split form.
pub fn circuit_hamiltonian(
    device: &DeviceSpec,
    config: &HilbertConfig,
    pulse: &FluxPulse,
    transfer: Transfer,
) -> Result<SplitHamiltonian> {
    config.validate()?;
    device.validate()?;
    let basis = LabeledBasis::new(config);
    let dim = basis.dim();
    let mut base = vec![0.0; dim];
    let mut weights = vec![0.0; dim];
    for (k, (b, w)) in base.iter_mut().zip(weights.iter_mut()).enumerate() {
        let [n1, n2, nc] = basis.label(k);
        *b = 2.0
            * PI
            * (level_energy(device.q1.frequency, device.q1.anharmonicity, n1)
                + level_energy(device.q2.frequency, device.q2.anharmonicity, n2)
                + level_energy(0.0, device.coupler.anharmonicity, nc));
        *w = 2.0 * PI * nc as f64;
    }
    let mb = base.iter().sum::<f64>() / dim as f64;
    let mw = weights.iter().sum::<f64>() / dim as f64;
    base.iter_mut().for_each(|b| *b -= mb);
    weights.iter_mut().for_each(|w| *w -= mw);

    let [a1, a2, ac] = build_operators(config)?;
    let xc = &ac + &crate::linalg::dagger(&ac);
    let x1 = &a1 + &crate::linalg::dagger(&a1);
    let x2 = &a2 + &crate::linalg::dagger(&a2);
    let v = (x1.dot(&xc) * (2.0 * PI * device.g1)) + (x2.dot(&xc) * (2.0 * PI * device.g2));
    let coupling = v.mapv(|z| z.re);

    Ok(SplitHamiltonian { base, weights, coupling, drive: CouplerDrive::new(device, pulse, transfer)? })
}

pub fn hamiltonian_at(
    device: &DeviceSpec,
    config: &HilbertConfig,
    pulse: &FluxPulse,
    transfer: Transfer,
    t: f64,
) -> Result<Array2<C64>> {
    if !(t >= 0.0 && t <= pulse.duration) {
        return Err(Error::OutOfPulseWindow { t, duration: pulse.duration });
    }
    Ok(circuit_hamiltonian(device, config, pulse, transfer)?.matrix_at(t))
}

fn pauli(which: char) -> Array2<C64> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let v = match which {
        'x' => vec![z, o, o, z],
        'z' => vec![o, z, z, -o],
        _ => vec![o, z, z, o],
    };
    Array2::from_shape_vec((2, 2), v).unwrap()
}

/// Pauli-form two-level Hamiltonian, 8×8 in the |q1 q2 c⟩ ordering, with |0⟩ the σ^z = +1 state.
pub fn two_level_hamiltonian_at(
    device: &DeviceSpec,
    pulse: &FluxPulse,
    transfer: Transfer,
    t: f64,
) -> Result<Array2<C64>> {
    if !(t >= 0.0 && t <= pulse.duration) {
        return Err(Error::OutOfPulseWindow { t, duration: pulse.duration });
    }
    let nc = CouplerDrive::new(device, pulse, transfer)?.at(t);
    let (x, z, e) = (pauli('x'), pauli('z'), pauli('i'));
    let three = |a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>| kron(&kron(a, b), c);
    let w = 2.0 * PI;
    let h = three(&z, &e, &e) * (-0.5 * w * device.q1.frequency)
        + three(&e, &z, &e) * (-0.5 * w * device.q2.frequency)
        + three(&e, &e, &z) * (-0.5 * w * nc)
        + three(&x, &e, &x) * (w * device.g1)
        + three(&e, &x, &x) * (w * device.g2);
    Ok(h)
}

/// Static Hamiltonian (rad/ns) at a fixed flux.
pub fn static_hamiltonian(device: &DeviceSpec, config: &HilbertConfig, flux: f64) -> Result<Array2<f64>> {
    let pulse = FluxPulse::square(flux, 0.0, 0.0, 0.0);
    let h = circuit_hamiltonian(device, config, &pulse, Transfer::Exact)?;
    Ok(h.static_matrix(coupler_frequency(device, flux)))
}

/// Eigenstates of the static Hamiltonian assigned to bare labels.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    /// Column k is the dressed state connected to bare index k.
    pub vectors: Array2<f64>,
    /// Dressed energies in GHz (ordinary frequency), trace-removed, indexed by bare index.
    pub energies: Vec<f64>,
}

/// Dressed states at flux θ. Each eigenvector is assigned to the bare state it overlaps most,
/// processing eigenvectors from strongest to weakest maximal overlap; the sign is fixed so
/// the overlap is positive.
pub fn dressed_basis(device: &DeviceSpec, config: &HilbertConfig, theta: f64) -> Result<DressedBasis> {
    let h = static_hamiltonian(device, config, theta)?;
    Ok(dressed_from_matrix(&h))
}

pub fn dressed_from_matrix(h: &Array2<f64>) -> DressedBasis {
    let n = h.nrows();
    let (vals, vecs) = sym_eigh(h);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for e in 0..n {
        for b in 0..n {
            pairs.push((vecs[[b, e]].abs(), e, b));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_e = vec![false; n];
    let mut used_b = vec![false; n];
    let mut vectors = Array2::zeros((n, n));
    let mut energies = vec![0.0; n];
    for (_, e, b) in pairs {
        if used_e[e] || used_b[b] {
            continue;
        }
        used_e[e] = true;
        used_b[b] = true;
        let sign = if vecs[[b, e]] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[[r, b]] = sign * vecs[[r, e]];
        }
        energies[b] = vals[e] / (2.0 * PI);
    }
    DressedBasis { vectors, energies }
}
