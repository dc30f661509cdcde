//! Lindblad evolution with amplitude damping a_i and dephasing a_i†a_i.
//!
//! Split Hamiltonians use Strang splitting over short blocks: half a dissipator step,
//! the exact block unitary ρ → WρW†, and another half dissipator step.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::{check_grid, spectral_spread_ghz, PropagationOptions, States, TimeDependent, Trajectory};
use super::{SplitPropagator, StaticPropagator};
use crate::device::{DeviceSpec, TransmonSpec};
use crate::error::{Error, Result};
use crate::hamiltonian::{HilbertConfig, LabeledBasis, SplitHamiltonian};
use crate::linalg::{dagger, hermitian_defect, min_eigenvalue, trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct TransmonRates {
    /// Relaxation rate Γ^− in 1/ns.
    pub gamma_minus: f64,
    /// Dephasing rate Γ^z in 1/ns.
    pub gamma_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct DissipationRates {
    pub q1: TransmonRates,
    pub q2: TransmonRates,
    pub coupler: TransmonRates,
}

impl DissipationRates {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        [self.q1, self.q2, self.coupler].iter().all(|r| r.gamma_minus == 0.0 && r.gamma_z == 0.0)
    }
}

/// Γ^− = 1/T1 and Γ^z = (1/T2 − 1/(2T1))/2, with T in µs and rates in 1/ns.
pub fn transmon_rates(spec: &TransmonSpec, name: &str) -> Result<TransmonRates> {
    let t1 = spec.t1.ok_or_else(|| Error::invalid(&format!("{name}.t1"), "required for dissipation"))?;
    if !(t1 > 0.0) {
        return Err(Error::invalid(&format!("{name}.t1"), "must be positive"));
    }
    let t1_ns = 1e3 * t1;
    let gamma_z = match spec.t2 {
        None => 0.0,
        Some(t2) => {
            if !(t2 > 0.0) || t2 > 2.0 * t1 {
                return Err(Error::invalid(&format!("{name}.t2"), format!("unphysical T2 = {t2} µs > 2 T1 = {} µs", 2.0 * t1)));
            }
            0.5 * (1.0 / (1e3 * t2) - 1.0 / (2.0 * t1_ns))
        }
    };
    Ok(TransmonRates { gamma_minus: 1.0 / t1_ns, gamma_z: gamma_z.max(0.0) })
}

pub fn rates_from_specs(device: &DeviceSpec) -> Result<DissipationRates> {
    Ok(DissipationRates {
        q1: transmon_rates(&device.q1, "q1")?,
        q2: transmon_rates(&device.q2, "q2")?,
        coupler: transmon_rates(&device.coupler, "coupler")?,
    })
}

#[derive(Debug, Clone)]
struct Jump {
    rate: f64,
    /// Column j of the lowering operator maps to (row, amplitude).
    target: Vec<Option<(usize, f64)>>,
}

/// Lindblad dissipator with lowering-type jumps and diagonal dephasing.
#[derive(Debug, Clone)]
pub struct Dissipator {
    dim: usize,
    jumps: Vec<Jump>,
    /// Elementwise part: dephasing plus the anticommutator terms of every jump.
    elementwise: Array2<f64>,
}

impl Dissipator {
    pub fn none(dim: usize) -> Self {
        Dissipator { dim, jumps: Vec::new(), elementwise: Array2::zeros((dim, dim)) }
    }

    /// One lowering and one dephasing channel per transmon of the circuit.
    pub fn for_circuit(config: &HilbertConfig, rates: &DissipationRates) -> Result<Self> {
        config.validate()?;
        let basis = LabeledBasis::new(config);
        let dim = basis.dim();
        let mut d = Dissipator::none(dim);
        for (w, r) in [rates.q1, rates.q2, rates.coupler].iter().enumerate() {
            let occ: Vec<usize> = basis.occupations(w);
            let target = (0..dim)
                .map(|k| {
                    let mut l = basis.label(k);
                    if l[w] == 0 {
                        None
                    } else {
                        l[w] -= 1;
                        Some((basis.index(l).unwrap(), (occ[k] as f64).sqrt()))
                    }
                })
                .collect();
            d.add_lowering(r.gamma_minus, target);
            d.add_dephasing(r.gamma_z, &occ.iter().map(|&n| n as f64).collect::<Vec<_>>());
        }
        Ok(d)
    }

    /// A single transmon with `levels` levels.
    pub fn single(levels: usize, rates: TransmonRates) -> Self {
        let mut d = Dissipator::none(levels);
        let target = (0..levels).map(|k| if k == 0 { None } else { Some((k - 1, (k as f64).sqrt())) }).collect();
        d.add_lowering(rates.gamma_minus, target);
        d.add_dephasing(rates.gamma_z, &(0..levels).map(|k| k as f64).collect::<Vec<_>>());
        d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.jumps.is_empty() && self.elementwise.iter().all(|&x| x == 0.0)
    }

    fn add_lowering(&mut self, rate: f64, target: Vec<Option<(usize, f64)>>) {
        if rate == 0.0 {
            return;
        }
        let occ: Vec<f64> = target.iter().map(|t| t.map_or(0.0, |(_, a)| a * a)).collect();
        for j in 0..self.dim {
            for k in 0..self.dim {
                self.elementwise[[j, k]] -= 0.5 * rate * (occ[j] + occ[k]);
            }
        }
        self.jumps.push(Jump { rate, target });
    }

    fn add_dephasing(&mut self, rate: f64, diag: &[f64]) {
        if rate == 0.0 {
            return;
        }
        for j in 0..self.dim {
            for k in 0..self.dim {
                self.elementwise[[j, k]] -= 0.5 * rate * (diag[j] - diag[k]).powi(2);
            }
        }
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = rho * &self.elementwise.mapv(|x| C64::new(x, 0.0));
        for jump in &self.jumps {
            for (j, tj) in jump.target.iter().enumerate() {
                let Some((dj, aj)) = *tj else { continue };
                for (k, tk) in jump.target.iter().enumerate() {
                    let Some((dk, ak)) = *tk else { continue };
                    out[[dj, dk]] += rho[[j, k]] * (jump.rate * aj * ak);
                }
            }
        }
        out
    }

    /// ρ ← exp(τ L) ρ by a fourth-order Taylor series.
    pub fn exp_apply(&self, rho: &mut Array2<C64>, tau: f64) {
        if self.is_zero() || tau == 0.0 {
            return;
        }
        let mut term = rho.clone();
        for n in 1..=4 {
            term = self.apply(&term) * (tau / n as f64);
            *rho += &term;
        }
    }
}

fn strang(rhos: &mut [Array2<C64>], w: &Array2<C64>, diss: &Dissipator, tau: f64) {
    let wd = dagger(w);
    for rho in rhos.iter_mut() {
        diss.exp_apply(rho, 0.5 * tau);
        *rho = w.dot(&*rho).dot(&wd);
        diss.exp_apply(rho, 0.5 * tau);
    }
}

fn direct_blocks(prop: &mut SplitPropagator, rhos: &mut [Array2<C64>], diss: &Dissipator, ta: f64, tb: f64, tau: f64) {
    let span = tb - ta;
    if span <= 0.0 {
        return;
    }
    let n = (span / tau).ceil().max(1.0) as usize;
    let h = span / n as f64;
    for i in 0..n {
        let s = ta + i as f64 * h;
        let w = prop.unitary(s, s + h);
        strang(rhos, &w, diss, h);
    }
}

/// Evolve a batch of operators under the Lindblad equation; `sink` sees the batch at each sample.
pub fn evolve_density_batch(
    ham: &SplitHamiltonian,
    mut rhos: Vec<Array2<C64>>,
    diss: &Dissipator,
    t0: f64,
    samples: &[f64],
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &[Array2<C64>]),
) -> Vec<Array2<C64>> {
    let tau = opts.lindblad_block;
    let step = opts.split_step(ham);
    if ham.drive.is_static() {
        let sp = StaticPropagator::new(&ham.matrix_at(t0));
        let mut t = t0;
        for (k, &s) in samples.iter().enumerate() {
            if s > t {
                let n = ((s - t) / tau).ceil().max(1.0) as usize;
                let h = (s - t) / n as f64;
                let w = sp.unitary(h);
                for _ in 0..n {
                    strang(&mut rhos, &w, diss, h);
                }
                t = s;
            }
            sink(k, &rhos);
        }
        return rhos;
    }
    let mut prop = SplitPropagator::new(ham, step);
    let (a, b) = ham.drive.pulse.flat_window();
    let end = samples.last().copied().unwrap_or(t0);
    let mut t = t0;
    let mut k = 0;
    while k < samples.len() && samples[k] < a {
        direct_blocks(&mut prop, &mut rhos, diss, t, samples[k], tau);
        t = samples[k];
        sink(k, &rhos);
        k += 1;
    }
    let ws = t.max(a);
    let we = end.min(b);
    if ws < we {
        direct_blocks(&mut prop, &mut rhos, diss, t, ws, tau);
        let first = k;
        while k < samples.len() && samples[k] <= we {
            k += 1;
        }
        window_blocks(&mut prop, &mut rhos, diss, ws, we, &samples[first..k], first, opts, sink);
        t = we;
    }
    while k < samples.len() {
        direct_blocks(&mut prop, &mut rhos, diss, t, samples[k], tau);
        t = samples[k];
        sink(k, &rhos);
        k += 1;
    }
    rhos
}

#[allow(clippy::too_many_arguments)]
fn window_blocks(
    prop: &mut SplitPropagator,
    rhos: &mut [Array2<C64>],
    diss: &Dissipator,
    ws: f64,
    we: f64,
    samples: &[f64],
    offset: usize,
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &[Array2<C64>]),
) {
    let tau = opts.lindblad_block;
    let ham = prop.hamiltonian();
    let nu = ham.drive.pulse.omega_phi;
    let periodic = nu > 0.0 && opts.floquet && (we - ws) * nu >= 2.0;
    let (spacing, blocks) = if nu == 0.0 {
        let n = ((we - ws) / tau).ceil().max(1.0);
        let h = (we - ws) / n;
        let sp = StaticPropagator::new(&ham.matrix_at(0.5 * (ws + we)));
        (h, vec![sp.unitary(h)])
    } else if periodic {
        let period = 1.0 / nu;
        let m = (period / tau).ceil().max(1.0) as usize;
        let table = prop.floquet_table(ws, period, m);
        (table.spacing(), (0..m).map(|j| table.block(j)).collect())
    } else {
        let mut t = ws;
        for (i, &s) in samples.iter().enumerate() {
            direct_blocks(prop, rhos, diss, t, s, tau);
            t = s;
            sink(offset + i, rhos);
        }
        direct_blocks(prop, rhos, diss, t, we, tau);
        return;
    };
    let m = blocks.len();
    let grid = |j: u64| ws + j as f64 * spacing;
    let mut j: u64 = 0;
    let run_to = |s: f64, rhos: &mut [Array2<C64>], j: &mut u64, prop: &mut SplitPropagator| {
        while grid(*j + 1) <= s {
            strang(rhos, &blocks[(*j % m as u64) as usize], diss, spacing);
            *j += 1;
        }
        let g = grid(*j);
        if s > g {
            let w = prop.unitary(g, s);
            strang(rhos, &w, diss, s - g);
        }
    };
    let mut i = 0;
    while i < samples.len() {
        let s = samples[i];
        run_to(s, rhos, &mut j, prop);
        sink(offset + i, rhos);
        i += 1;
        if s > grid(j) {
            let g1 = grid(j + 1);
            if g1 <= we {
                let w = prop.unitary(s, g1);
                strang(rhos, &w, diss, g1 - s);
                j += 1;
            } else {
                // inside the trailing partial block: finish the window directly
                let mut t = s;
                for (r, &s2) in samples.iter().enumerate().skip(i) {
                    direct_blocks(prop, rhos, diss, t, s2, tau);
                    t = s2;
                    sink(offset + r, rhos);
                }
                direct_blocks(prop, rhos, diss, t, we, tau);
                return;
            }
        }
    }
    run_to(we, rhos, &mut j, prop);
}

fn lindblad_rhs<H: TimeDependent + ?Sized>(ham: &H, diss: &Dissipator, t: f64, rho: &Array2<C64>) -> Array2<C64> {
    let h = ham.matrix_at(t);
    let comm = h.dot(rho) - rho.dot(&h);
    diss.apply(rho) + comm * C64::new(0.0, -1.0)
}

fn evolve_density_dense<H: TimeDependent + ?Sized>(
    ham: &H,
    mut rho: Array2<C64>,
    diss: &Dissipator,
    t0: f64,
    samples: &[f64],
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &Array2<C64>),
) {
    let end = samples.last().copied().unwrap_or(t0);
    let spread = spectral_spread_ghz(ham, &[t0, 0.5 * (t0 + end), end]);
    let hmax = opts.dense_step(spread);
    let mut t = t0;
    for (k, &s) in samples.iter().enumerate() {
        let span = s - t;
        if span > 0.0 {
            let n = (span / hmax).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for i in 0..n {
                let ti = t + i as f64 * h;
                let k1 = lindblad_rhs(ham, diss, ti, &rho);
                let k2 = lindblad_rhs(ham, diss, ti + 0.5 * h, &(&rho + &(&k1 * (0.5 * h))));
                let k3 = lindblad_rhs(ham, diss, ti + 0.5 * h, &(&rho + &(&k2 * (0.5 * h))));
                let k4 = lindblad_rhs(ham, diss, ti + h, &(&rho + &(&k3 * h)));
                rho = &rho + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0));
            }
        }
        t = s;
        sink(k, &rho);
    }
}

pub fn propagate_lindblad<H: TimeDependent + ?Sized>(
    ham: &H,
    rho0: &Array2<C64>,
    diss: &Dissipator,
    grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    check_grid(grid)?;
    opts.validate()?;
    let d = ham.dim();
    if rho0.dim() != (d, d) || diss.dim() != d {
        return Err(Error::invalid("rho0", "dimension mismatch"));
    }
    if (trace(rho0).re - 1.0).abs() > 1e-8 || hermitian_defect(rho0) > 1e-10 || min_eigenvalue(rho0) < -1e-8 {
        return Err(Error::invalid("rho0", "must be a positive semidefinite matrix with unit trace"));
    }
    let mut out: Vec<Array2<C64>> = Vec::with_capacity(grid.len());
    match ham.split() {
        Some(sh) => {
            let mut sink = |_: usize, r: &[Array2<C64>]| out.push(r[0].clone());
            evolve_density_batch(sh, vec![rho0.clone()], diss, grid[0], grid, opts, &mut sink);
        }
        None => {
            let mut sink = |_: usize, r: &Array2<C64>| out.push(r.clone());
            evolve_density_dense(ham, rho0.clone(), diss, grid[0], grid, opts, &mut sink);
        }
    }
    for r in &out {
        let drift = (trace(r).re - 1.0).abs();
        if !(drift <= opts.norm_tol) {
            return Err(Error::NormDrift { what: "density-matrix trace", drift, tol: opts.norm_tol });
        }
        let herm = hermitian_defect(r);
        if !(herm <= 1e-10) {
            return Err(Error::NormDrift { what: "density-matrix hermiticity", drift: herm, tol: 1e-10 });
        }
    }
    Ok(Trajectory { times: grid.to_vec(), states: States::Mixed(out) })
}
