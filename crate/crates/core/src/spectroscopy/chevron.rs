//! Chevron scans and resonance extraction.

use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_damped_oscillation, OscillationFit};
use crate::device::{DeviceSpec, Envelope, FluxPulse, Transfer};
use crate::dynamics::{propagate_schrodinger, PropagationOptions, Trajectory};
use crate::effective::Gate;
use crate::error::{Error, Result};
use crate::hamiltonian::{circuit_hamiltonian, dressed_basis, HilbertConfig, LabeledBasis};

/// Basis in which states are prepared and populations read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Bare,
    /// Eigenstates of the static Hamiltonian at the dc bias.
    #[default]
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    pub transfer: Transfer,
    pub readout: Readout,
    pub propagation: PropagationOptions,
}

/// Prepared states and projectors for one Hilbert space and bias.
pub(crate) struct Frame {
    pub basis: LabeledBasis,
    /// Column k is the readout vector of basis index k.
    pub vectors: Array2<f64>,
}

impl Frame {
    pub fn new(device: &DeviceSpec, hilbert: &HilbertConfig, theta: f64, readout: Readout) -> Result<Self> {
        hilbert.validate()?;
        let basis = LabeledBasis::new(hilbert);
        let vectors = match readout {
            Readout::Bare => Array2::eye(basis.dim()),
            Readout::Dressed => dressed_basis(device, hilbert, theta)?.vectors,
        };
        Ok(Frame { basis, vectors })
    }

    pub fn state(&self, k: usize) -> Array1<C64> {
        self.vectors.column(k).mapv(|x| C64::new(x, 0.0))
    }

    pub fn population(&self, traj: &Trajectory, s: usize, k: usize) -> f64 {
        traj.projected_population(s, self.vectors.column(k))
    }
}

/// Sampling grid used for propagation: the requested times, preceded by t = 0 if needed.
pub(crate) fn propagation_grid(t_grid: &[f64]) -> Result<(Vec<f64>, usize)> {
    if t_grid.is_empty() {
        return Err(Error::invalid("t_grid", "must not be empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("t_grid", "must be non-negative and strictly increasing"));
    }
    if t_grid[0] > 0.0 {
        let mut g = Vec::with_capacity(t_grid.len() + 1);
        g.push(0.0);
        g.extend_from_slice(t_grid);
        Ok((g, 1))
    } else {
        Ok((t_grid.to_vec(), 0))
    }
}

/// Pulse that stays on its flat top over the whole sampling window: the rise precedes the
/// first samples and the fall starts after the last one.
pub(crate) fn scan_pulse(template: &FluxPulse, omega_phi: f64, t_last: f64) -> FluxPulse {
    let duration = match template.envelope {
        Envelope::PureSquare => t_last,
        Envelope::SquareGaussianEdges => t_last + template.edge_time,
    };
    template.with_omega_phi(omega_phi).with_duration(duration.max(2.0 * template.edge_time + 1e-9))
}

pub(crate) fn check_omega_grid(omega_grid: &[f64]) -> Result<()> {
    if omega_grid.is_empty() {
        return Err(Error::invalid("omega_grid", "must not be empty"));
    }
    if omega_grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("omega_grid", "frequencies must be finite and non-negative"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChevronData {
    /// GHz.
    pub omega_phi: Vec<f64>,
    /// ns.
    pub times: Vec<f64>,
    /// populations[j][s]: tracked population at omega_phi[j], times[s].
    pub populations: Vec<Vec<f64>>,
    pub initial: String,
    pub tracked: String,
    pub template: FluxPulse,
    pub readout: Readout,
}

impl ChevronData {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.populations[j]
    }

    /// Matrix layout: header row of ω_Φ values, then one row per time index.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write!(out, "time_index,time_ns")?;
        for w in &self.omega_phi {
            write!(out, ",{w:.9}")?;
        }
        writeln!(out)?;
        for (s, t) in self.times.iter().enumerate() {
            write!(out, "{s},{t}")?;
            for col in &self.populations {
                write!(out, ",{:.10e}", col[s])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// One Schrödinger propagation per ω_Φ, sampling the tracked population on `t_grid`.
/// Columns run in parallel and are merged by grid index.
#[allow(clippy::too_many_arguments)]
pub fn chevron_scan(
    device: &DeviceSpec,
    hilbert: &HilbertConfig,
    template: &FluxPulse,
    omega_grid: &[f64],
    t_grid: &[f64],
    initial: &str,
    tracked: &str,
    opts: &ScanOptions,
) -> Result<ChevronData> {
    device.validate()?;
    check_omega_grid(omega_grid)?;
    let (grid, skip) = propagation_grid(t_grid)?;
    opts.propagation.validate()?;
    let frame = Frame::new(device, hilbert, template.theta, opts.readout)?;
    let i0 = frame.basis.parse(initial)?;
    let it = frame.basis.parse(tracked)?;
    let psi0 = frame.state(i0);
    let t_last = *grid.last().unwrap();
    for &w in omega_grid {
        scan_pulse(template, w, t_last).validate()?;
    }
    let populations = omega_grid
        .par_iter()
        .map(|&w| {
            let pulse = scan_pulse(template, w, t_last);
            let ham = circuit_hamiltonian(device, hilbert, &pulse, opts.transfer)?;
            let traj = propagate_schrodinger(&ham, &psi0, &grid, &opts.propagation)?;
            Ok((skip..grid.len()).map(|s| frame.population(&traj, s, it)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ChevronData {
        omega_phi: omega_grid.to_vec(),
        times: grid[skip..].to_vec(),
        populations,
        initial: initial.to_string(),
        tracked: tracked.to_string(),
        template: *template,
        readout: opts.readout,
    })
}

/// Scan window of 41 points: ±15 MHz for iSWAP, ±8 MHz for bSWAP.
pub fn default_omega_grid(gate: Gate, center: f64) -> Vec<f64> {
    let half = match gate {
        Gate::Iswap => 0.015,
        Gate::Bswap => 0.008,
    };
    linspace(center - half, center + half, 41)
}

/// 201 samples from 0 to 2 µs.
pub fn default_time_grid() -> Vec<f64> {
    linspace(0.0, 2000.0, 201)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub omega_phi: f64,
    pub fit: OscillationFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceProfile {
    /// Successful fits, sorted by ω_Φ.
    pub points: Vec<ProfilePoint>,
    /// Columns whose fit failed, with the reason.
    pub failures: Vec<(f64, String)>,
    /// Drive frequency at the minimum oscillation frequency, GHz.
    pub omega_res: f64,
    /// Minimum oscillation frequency, GHz.
    pub f_min: f64,
    /// Leading coefficient of the parabola fitted to f²; 1 for an ideal two-state chevron.
    pub curvature: f64,
}

impl ResonanceProfile {
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "omega_phi_ghz,frequency_ghz,decay_per_ns,amplitude,offset,phase,residual")?;
        for p in &self.points {
            let f = &p.fit;
            writeln!(
                out,
                "{:.9},{:.9e},{:.6e},{:.6e},{:.6e},{:.6},{:.3e}",
                p.omega_phi, f.frequency, f.decay, f.amplitude, f.offset, f.phase, f.residual
            )?;
        }
        Ok(())
    }
}

/// Number of points around the grid minimum used for the parabolic refinement.
const REFINE_POINTS: usize = 7;

/// Fits every column, then refines the minimum of f(ω_Φ) by fitting the two-state form
/// f² = f_min² + κ(ω_Φ − ω_res)² to the points around the grid minimum.
pub fn resonance_profile(chevron: &ChevronData) -> Result<ResonanceProfile> {
    let fits: Vec<std::result::Result<OscillationFit, String>> = chevron
        .populations
        .par_iter()
        .map(|col| fit_damped_oscillation(&chevron.times, col).map_err(|e| e.to_string()))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (&w, fit) in chevron.omega_phi.iter().zip(fits) {
        match fit {
            Ok(fit) => points.push(ProfilePoint { omega_phi: w, fit }),
            Err(e) => failures.push((w, e)),
        }
    }
    points.sort_by(|a, b| a.omega_phi.total_cmp(&b.omega_phi));
    failures.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.len() < 3 {
        return Err(Error::NoResonance(format!("only {} of {} columns could be fitted", points.len(), chevron.omega_phi.len())));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.omega_phi).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.fit.frequency).collect();
    let (omega_res, f_min, curvature) = refine_minimum(&xs, &ys)?;
    Ok(ResonanceProfile { points, failures, omega_res, f_min, curvature })
}

/// Parabolic refinement of the minimum of y(x) using f² = a(x − x0)² + c around the sampled
/// minimum. `xs` must be sorted.
pub fn refine_minimum(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    let kmin = (0..n).min_by(|&a, &b| ys[a].total_cmp(&ys[b])).ok_or_else(|| Error::NoResonance("empty profile".into()))?;
    let half = REFINE_POINTS / 2;
    let lo = kmin.saturating_sub(half).min(n.saturating_sub(REFINE_POINTS));
    let hi = (lo + REFINE_POINTS).min(n);
    if hi - lo < 3 {
        return Err(Error::NoResonance("fewer than three points around the minimum".into()));
    }
    if kmin == 0 || kmin == n - 1 {
        return Err(Error::NoResonance(format!("minimum at the scan edge ({:.6} GHz)", xs[kmin])));
    }
    let xc = xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    let scale = xs[lo..hi].iter().map(|x| (x - xc).abs()).fold(0.0, f64::max).max(1e-15);
    let mut ata = Array2::<f64>::zeros((3, 3));
    let mut atb = [0.0; 3];
    for k in lo..hi {
        let u = (xs[k] - xc) / scale;
        let row = [u * u, u, 1.0];
        let y2 = ys[k] * ys[k];
        for a in 0..3 {
            atb[a] += row[a] * y2;
            for b in 0..3 {
                ata[[a, b]] += row[a] * row[b];
            }
        }
    }
    let c = crate::linalg::solve(&ata, &atb).ok_or_else(|| Error::NoResonance("degenerate refinement design".into()))?;
    if !(c[0] > 0.0) {
        return Err(Error::NoResonance("oscillation frequency has no interior minimum".into()));
    }
    let u0 = -c[1] / (2.0 * c[0]);
    let x0 = xc + u0 * scale;
    let f2 = c[2] - c[1] * c[1] / (4.0 * c[0]);
    Ok((x0, f2.max(0.0).sqrt(), c[0] / (scale * scale)))
}
