//! Pure-state and density-matrix propagation under the circuit Hamiltonian.

mod lindblad;
mod split;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::hamiltonian::{label_string, LabeledBasis, SplitHamiltonian};
use crate::linalg::herm_eigh;

pub use lindblad::{
    evolve_density_batch, propagate_lindblad, rates_from_specs, transmon_rates, DissipationRates, Dissipator,
    TransmonRates,
};
pub use split::{FloquetTable, SplitPropagator, StaticPropagator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationOptions {
    /// Steps per period of the fastest transition frequency.
    pub steps_per_cycle: f64,
    /// Hard upper bound on the step in ns.
    pub max_step: Option<f64>,
    /// Use one-period propagator powers inside the flat top.
    pub floquet: bool,
    /// Checkpoints per modulation period for sampling inside the flat top.
    pub checkpoints: usize,
    /// Lindblad splitting block length in ns.
    pub lindblad_block: f64,
    pub norm_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            steps_per_cycle: 80.0,
            max_step: None,
            floquet: true,
            checkpoints: 64,
            lindblad_block: 0.1,
            norm_tol: 1e-8,
        }
    }
}

impl PropagationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.steps_per_cycle >= 4.0) {
            return Err(Error::invalid("propagation.steps_per_cycle", "must be at least 4"));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::invalid("propagation.max_step", "must be positive"));
            }
        }
        if self.checkpoints == 0 {
            return Err(Error::invalid("propagation.checkpoints", "must be positive"));
        }
        if !(self.lindblad_block > 0.0) {
            return Err(Error::invalid("propagation.lindblad_block", "must be positive"));
        }
        Ok(())
    }

    /// Same settings with the step halved, for convergence checks.
    pub fn halved(&self, ham: &SplitHamiltonian) -> Self {
        PropagationOptions { max_step: Some(0.5 * self.split_step(ham)), ..*self }
    }

    pub fn split_step(&self, ham: &SplitHamiltonian) -> f64 {
        let nu = ham.max_transition_frequency().max(1e-3);
        let h = 1.0 / (self.steps_per_cycle * nu);
        match self.max_step {
            Some(m) => m.min(h),
            None => h,
        }
    }

    fn dense_step(&self, spread_ghz: f64) -> f64 {
        let h = if spread_ghz > 0.0 { 1.0 / (self.steps_per_cycle * spread_ghz) } else { f64::INFINITY };
        match self.max_step {
            Some(m) => m.min(h),
            None => h.min(1.0),
        }
    }
}

/// Time-dependent Hamiltonian in rad/ns.
pub trait TimeDependent: Sync {
    fn dim(&self) -> usize;
    fn matrix_at(&self, t: f64) -> Array2<C64>;
    fn split(&self) -> Option<&SplitHamiltonian> {
        None
    }
}

impl TimeDependent for SplitHamiltonian {
    fn dim(&self) -> usize {
        SplitHamiltonian::dim(self)
    }
    fn matrix_at(&self, t: f64) -> Array2<C64> {
        SplitHamiltonian::matrix_at(self, t)
    }
    fn split(&self) -> Option<&SplitHamiltonian> {
        Some(self)
    }
}

/// Generic Hamiltonian from a closure, integrated with classical RK4.
pub struct DenseHamiltonian<F: Fn(f64) -> Array2<C64> + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64) -> Array2<C64> + Sync> DenseHamiltonian<F> {
    pub fn new(dim: usize, f: F) -> Self {
        DenseHamiltonian { dim, f }
    }
}

impl<F: Fn(f64) -> Array2<C64> + Sync> TimeDependent for DenseHamiltonian<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix_at(&self, t: f64) -> Array2<C64> {
        (self.f)(t)
    }
}

fn spectral_spread_ghz<H: TimeDependent + ?Sized>(ham: &H, times: &[f64]) -> f64 {
    times
        .iter()
        .map(|&t| {
            let (v, _) = herm_eigh(&ham.matrix_at(t));
            (v[v.len() - 1] - v[0]) / (2.0 * PI)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub enum States {
    Pure(Vec<Array1<C64>>),
    Mixed(Vec<Array2<C64>>),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: States,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Probability of basis index `k` at sample `s`.
    pub fn population(&self, s: usize, k: usize) -> f64 {
        match &self.states {
            States::Pure(v) => v[s][k].norm_sqr(),
            States::Mixed(r) => r[s][[k, k]].re,
        }
    }

    /// Population of the unit vector `v` (e.g. a dressed state) at sample `s`.
    pub fn projected_population(&self, s: usize, v: ndarray::ArrayView1<f64>) -> f64 {
        match &self.states {
            States::Pure(p) => {
                let a: C64 = p[s].iter().zip(v.iter()).map(|(z, x)| z * x).sum();
                a.norm_sqr()
            }
            States::Mixed(r) => {
                let rv = r[s].dot(&v.mapv(|x| C64::new(x, 0.0)));
                v.iter().zip(rv.iter()).map(|(x, z)| x * z.re).sum()
            }
        }
    }

    pub fn total_population(&self, s: usize) -> f64 {
        match &self.states {
            States::Pure(v) => v[s].iter().map(|z| z.norm_sqr()).sum(),
            States::Mixed(r) => r[s].diag().iter().map(|z| z.re).sum(),
        }
    }
}

/// Bare-basis populations of the given indices; one series per index.
pub fn populations(traj: &Trajectory, indices: &[usize]) -> Vec<Vec<f64>> {
    indices.iter().map(|&k| (0..traj.len()).map(|s| traj.population(s, k)).collect()).collect()
}

/// Populations of basis labels written as strings such as "100".
pub fn populations_by_label(traj: &Trajectory, basis: &LabeledBasis, labels: &[&str]) -> Result<Vec<Vec<f64>>> {
    let idx = labels.iter().map(|l| basis.parse(l)).collect::<Result<Vec<_>>>()?;
    Ok(populations(traj, &idx))
}

/// CSV export: `time_ns` then one column per label.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    traj: &Trajectory,
    basis: &LabeledBasis,
    indices: &[usize],
) -> Result<()> {
    write!(out, "time_ns")?;
    for &k in indices {
        write!(out, ",p{}", label_string(basis.label(k)))?;
    }
    writeln!(out)?;
    for (s, t) in traj.times.iter().enumerate() {
        write!(out, "{t}")?;
        for &k in indices {
            write!(out, ",{:.12e}", traj.population(s, k))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("t_grid", "must not be empty"));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("t_grid", "must be finite and non-decreasing"));
    }
    Ok(())
}

/// Evolve the columns of `states` from `grid[0]` and return the columns at every grid time.
pub fn propagate_columns<H: TimeDependent + ?Sized>(
    ham: &H,
    states: Array2<C64>,
    grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<Array2<C64>>> {
    check_grid(grid)?;
    opts.validate()?;
    let mut out = Vec::with_capacity(grid.len());
    let norms0: Vec<f64> = states.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();
    {
        let mut sink = |_: usize, s: &Array2<C64>| out.push(s.clone());
        match ham.split() {
            Some(sh) => evolve_split(sh, states, grid[0], grid, opts, &mut sink),
            None => evolve_dense(ham, states, grid[0], grid, opts, &mut sink),
        };
    }
    for s in &out {
        for (c, n0) in s.columns().into_iter().zip(&norms0) {
            let n: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            let drift = (n - n0).abs();
            if !(drift <= opts.norm_tol) {
                return Err(Error::NormDrift { what: "state norm", drift, tol: opts.norm_tol });
            }
        }
    }
    Ok(out)
}

pub fn propagate_schrodinger<H: TimeDependent + ?Sized>(
    ham: &H,
    psi0: &Array1<C64>,
    grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    if psi0.len() != ham.dim() {
        return Err(Error::invalid("psi0", "dimension mismatch"));
    }
    let n: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    if !((n - 1.0).abs() <= 1e-8) {
        return Err(Error::invalid("psi0", "state must be normalized"));
    }
    let col = psi0.clone().insert_axis(ndarray::Axis(1));
    let out = propagate_columns(ham, col, grid, opts)?;
    Ok(Trajectory {
        times: grid.to_vec(),
        states: States::Pure(out.into_iter().map(|m| m.column(0).to_owned()).collect()),
    })
}

/// Core sampler for split Hamiltonians: evolves through pre-window, flat top and post-window.
pub(crate) fn evolve_split(
    ham: &SplitHamiltonian,
    mut state: Array2<C64>,
    t0: f64,
    samples: &[f64],
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &Array2<C64>),
) -> Array2<C64> {
    let step = opts.split_step(ham);
    if ham.drive.is_static() {
        let sp = StaticPropagator::new(&ham.matrix_at(t0));
        let mut last = state.clone();
        for (k, &s) in samples.iter().enumerate() {
            last = sp.apply(&state, s - t0);
            sink(k, &last);
        }
        return last;
    }
    let mut prop = SplitPropagator::new(ham, step);
    let pulse = ham.drive.pulse;
    let (a, b) = pulse.flat_window();
    let end = samples.last().copied().unwrap_or(t0);
    let mut t = t0;
    let mut k = 0;

    while k < samples.len() && samples[k] < a {
        prop.advance(&mut state, t, samples[k]);
        t = samples[k];
        sink(k, &state);
        k += 1;
    }
    let ws = t.max(a);
    let we = end.min(b);
    if ws < we {
        prop.advance(&mut state, t, ws);
        let first = k;
        while k < samples.len() && samples[k] <= we {
            k += 1;
        }
        state = evolve_window(&mut prop, state, ws, we, &samples[first..k], first, opts, sink);
        t = we;
    }
    while k < samples.len() {
        prop.advance(&mut state, t, samples[k]);
        t = samples[k];
        sink(k, &state);
        k += 1;
    }
    state
}

#[allow(clippy::too_many_arguments)]
fn evolve_window(
    prop: &mut SplitPropagator,
    mut state: Array2<C64>,
    ws: f64,
    we: f64,
    samples: &[f64],
    offset: usize,
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &Array2<C64>),
) -> Array2<C64> {
    let ham = prop.hamiltonian();
    let nu = ham.drive.pulse.omega_phi;
    if nu == 0.0 {
        let sp = StaticPropagator::new(&ham.matrix_at(0.5 * (ws + we)));
        for (i, &s) in samples.iter().enumerate() {
            sink(offset + i, &sp.apply(&state, s - ws));
        }
        return sp.apply(&state, we - ws);
    }
    let period = 1.0 / nu;
    let n_full = ((we - ws) / period).floor() as u64;
    let d = ham.dim();
    let m = state.ncols();
    if !opts.floquet || n_full < 4 || (n_full as usize) * m <= 2 * d {
        let mut t = ws;
        for (i, &s) in samples.iter().enumerate() {
            prop.advance(&mut state, t, s);
            t = s;
            sink(offset + i, &state);
        }
        prop.advance(&mut state, t, we);
        return state;
    }
    let per_period = (period / prop.max_step()).ceil() as usize;
    let mcount = opts.checkpoints.min(per_period).max(1);
    let mut table = prop.floquet_table(ws, period, mcount);
    let spacing = table.spacing();
    let mut anchor = state;
    let mut n_anchor = 0u64;
    let at = |s: f64, anchor: &mut Array2<C64>, n_anchor: &mut u64, table: &mut FloquetTable, prop: &mut SplitPropagator| {
        let r = (s - ws).max(0.0);
        let n = ((r / period).floor() as u64).min(n_full);
        table.advance_periods(anchor, n - *n_anchor);
        *n_anchor = n;
        let rem = r - n as f64 * period;
        let j = ((rem / spacing).floor() as usize).min(mcount - 1);
        let mut x = if j == 0 { anchor.clone() } else { table.checkpoints[j].dot(anchor) };
        let g = ws + n as f64 * period + j as f64 * spacing;
        prop.advance(&mut x, g, s);
        x
    };
    for (i, &s) in samples.iter().enumerate() {
        let x = at(s, &mut anchor, &mut n_anchor, &mut table, prop);
        sink(offset + i, &x);
    }
    at(we, &mut anchor, &mut n_anchor, &mut table, prop)
}

fn rk4_step<H: TimeDependent + ?Sized>(ham: &H, y: &Array2<C64>, t: f64, h: f64) -> Array2<C64> {
    let mi = C64::new(0.0, -1.0);
    let f = |t: f64, y: &Array2<C64>| ham.matrix_at(t).dot(y) * mi;
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &(&k1 * (0.5 * h))));
    let k3 = f(t + 0.5 * h, &(y + &(&k2 * (0.5 * h))));
    let k4 = f(t + h, &(y + &(&k3 * h)));
    y + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn evolve_dense<H: TimeDependent + ?Sized>(
    ham: &H,
    mut state: Array2<C64>,
    t0: f64,
    samples: &[f64],
    opts: &PropagationOptions,
    sink: &mut dyn FnMut(usize, &Array2<C64>),
) -> Array2<C64> {
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
                state = rk4_step(ham, &state, t + i as f64 * h, h);
            }
        }
        t = s;
        sink(k, &state);
    }
    state
}

#[cfg(test)]
mod tests;
