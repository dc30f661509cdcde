//! Data-generation commands. Each validates the whole config first, then writes
//! plot-ready CSV/JSON files whose header records the resolved config and crate version.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{leakage_labels, Command, RunConfig};
use crate::dynamics::{rates_from_specs, DissipationRates};
use crate::effective::{
    calibrate_delta, dispersive_shift, gate_strength_adiabatic, gate_strength_bswap, gate_strength_iswap,
    ode_gate_prediction, Calibration, Gate,
};
use crate::error::{Error, Result};
use crate::metrics::{
    gate_error_sweep, haar_fidelity_mc, phase_correction, CalibratedGate, ChannelOptions, FidelityReport, GateOptions,
};
use crate::spectroscopy::{
    chevron_scan, gate_labels, leakage_spectrum, linspace, locate_resonance, predicted_resonance, resonance_profile,
    static_resonance, write_leakage_csv,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fills every defaulted grid parameter so the recorded config reproduces the run exactly.
pub fn resolve(config: &RunConfig, command: Command) -> Result<RunConfig> {
    config.validate(command)?;
    let mut cfg = config.clone();
    let theta = cfg.pulse.theta;
    match command {
        Command::Chevron => {
            let c = &mut cfg.chevron;
            if c.omega_center.is_none() {
                c.omega_center = Some(predicted_resonance(&cfg.device, &cfg.hilbert, theta, cfg.pulse.delta, c.gate)?);
            }
            if c.omega_half_width.is_none() {
                c.omega_half_width = Some(match c.gate {
                    Gate::Iswap => 0.015,
                    Gate::Bswap => 0.008,
                });
            }
        }
        Command::Leakage => {
            let l = &mut cfg.leakage;
            let delta = *l.delta.get_or_insert(cfg.pulse.delta);
            let center = predicted_resonance(&cfg.device, &cfg.hilbert, theta, delta, l.gate)?;
            let span = match l.gate {
                Gate::Iswap => 0.3,
                Gate::Bswap => 0.5,
            };
            l.omega_min.get_or_insert((center - span).max(0.01));
            l.omega_max.get_or_insert(center + span);
            let (initial, subspace) = leakage_labels(l);
            l.initial = Some(initial);
            l.subspace = Some(subspace);
            if !(l.omega_min < l.omega_max) {
                return Err(Error::invalid("leakage.omega_max", "must exceed omega_min"));
            }
        }
        _ => {}
    }
    Ok(cfg)
}

/// Commented provenance block written at the top of every CSV.
pub fn provenance_header(command: Command, resolved: &RunConfig) -> String {
    let mut s = format!("# pgsim-core {VERSION}\n# command: {}\n# resolved config:\n", command.name());
    for line in resolved.to_toml().lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

fn create(out: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(out)?;
    let path = out.join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

#[derive(Serialize)]
struct Provenance<'a, T: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    result: T,
}

fn write_json<T: Serialize>(out: &Path, name: &str, command: Command, cfg: &RunConfig, result: T) -> Result<PathBuf> {
    let (path, mut w) = create(out, name)?;
    let doc = Provenance { version: VERSION, command: command.name(), config: cfg, result };
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::Config(format!("json: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

/// Runs one command and returns the files written.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg = resolve(config, command)?;
    match command {
        Command::Chevron => chevron(&cfg, out),
        Command::Strengths => strengths(&cfg, out),
        Command::Leakage => leakage(&cfg, out),
        Command::Fidelity => fidelity(&cfg, out),
        Command::Calibrate => calibrate(&cfg, out),
    }
}

fn chevron(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.chevron;
    let center = c.omega_center.expect("resolved");
    let half = c.omega_half_width.expect("resolved");
    let grid = linspace(center - half, center + half, c.omega_points);
    let times = linspace(0.0, c.t_max, c.t_points);
    let (initial, tracked) = gate_labels(c.gate);
    let template = cfg.pulse.template();
    let chev = chevron_scan(&cfg.device, &cfg.hilbert, &template, &grid, &times, initial, tracked, &cfg.scan)?;
    let header = provenance_header(Command::Chevron, cfg);
    let gate = c.gate.name();
    let (p1, mut w) = create(out, &format!("chevron_{gate}.csv"))?;
    w.write_all(header.as_bytes())?;
    chev.write_csv(&mut w)?;
    w.flush()?;
    let (p2, mut w) = create(out, &format!("resonance_profile_{gate}.csv"))?;
    w.write_all(header.as_bytes())?;
    match resonance_profile(&chev) {
        Ok(profile) => {
            writeln!(w, "# omega_res_ghz = {:.9}", profile.omega_res)?;
            writeln!(w, "# f_min_ghz = {:.9e}", profile.f_min)?;
            writeln!(w, "# strength_ghz = {:.9e}", profile.f_min / 4.0)?;
            profile.write_csv(&mut w)?;
            eprintln!(
                "{gate}: resonance {:.6} GHz, minimum oscillation frequency {:.4} MHz",
                profile.omega_res,
                1e3 * profile.f_min
            );
        }
        Err(e) => {
            // A flat chevron (no modulation, decoupled device) has no resonance to report.
            writeln!(w, "# no resonance: {e}")?;
            writeln!(w, "omega_phi_ghz,frequency_ghz,decay_per_ns,amplitude,offset,phase,residual")?;
            eprintln!("{gate}: no resonance extracted ({e})");
        }
    }
    w.flush()?;
    Ok(vec![p1, p2])
}

#[derive(Debug, Clone, Copy, Default)]
struct StrengthRow {
    delta: f64,
    linear: [f64; 2],
    adiabatic: f64,
    ode: [Option<f64>; 2],
    numeric: [Option<f64>; 2],
    resonance_d1: [Option<f64>; 2],
    resonance_numeric: [Option<f64>; 2],
}

const GATES: [Gate; 2] = [Gate::Iswap, Gate::Bswap];

fn strength_row(cfg: &RunConfig, delta: f64) -> Result<StrengthRow> {
    let s = &cfg.strengths;
    let (d, theta) = (&cfg.device, cfg.pulse.theta);
    let mut row = StrengthRow {
        delta,
        linear: [gate_strength_iswap(d, theta, delta)?, gate_strength_bswap(d, theta, delta)?],
        adiabatic: gate_strength_adiabatic(d, theta, delta)?,
        ..Default::default()
    };
    for (k, gate) in GATES.into_iter().enumerate() {
        row.resonance_d1[k] = dispersive_shift(d, theta, delta, gate).ok().map(|x| x.omega_phi);
        if s.ode {
            row.ode[k] = if delta == 0.0 {
                Some(0.0)
            } else {
                match ode_gate_prediction(d, theta, delta, gate, cfg.scan.transfer, s.samples_per_period, &s.alpha) {
                    Ok(p) => Some(p.strength),
                    Err(e) => {
                        eprintln!("strengths: {} ODE prediction at delta = {delta}: {e}", gate.name());
                        None
                    }
                }
            };
        }
        if s.numeric {
            if delta == 0.0 {
                row.numeric[k] = Some(0.0);
                row.resonance_numeric[k] = Some(static_resonance(d, &cfg.hilbert, theta, gate)?);
            } else {
                let template = cfg.pulse.template().with_delta(delta);
                match locate_resonance(d, &cfg.hilbert, &template, gate, &s.search, &cfg.scan) {
                    Ok(r) => {
                        row.numeric[k] = Some(r.strength());
                        row.resonance_numeric[k] = Some(r.omega_res());
                    }
                    Err(e) if !e.is_validation() => {
                        eprintln!("strengths: {} spectroscopy at delta = {delta}: {e}", gate.name());
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(row)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.9e}")).unwrap_or_default()
}

fn strengths(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let rows: Vec<StrengthRow> =
        cfg.strengths.deltas.par_iter().map(|&delta| strength_row(cfg, delta)).collect::<Result<_>>()?;
    let (path, mut w) = create(out, "strengths.csv")?;
    w.write_all(provenance_header(Command::Strengths, cfg).as_bytes())?;
    writeln!(
        w,
        "delta_phi0,iswap_linear_ghz,bswap_linear_ghz,adiabatic_ghz,iswap_ode_ghz,bswap_ode_ghz,\
         iswap_numeric_ghz,bswap_numeric_ghz,iswap_resonance_d1_ghz,bswap_resonance_d1_ghz,\
         iswap_resonance_numeric_ghz,bswap_resonance_numeric_ghz"
    )?;
    for r in &rows {
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{},{},{},{},{},{},{},{}",
            r.delta,
            r.linear[0],
            r.linear[1],
            r.adiabatic,
            cell(r.ode[0]),
            cell(r.ode[1]),
            cell(r.numeric[0]),
            cell(r.numeric[1]),
            cell(r.resonance_d1[0]),
            cell(r.resonance_d1[1]),
            cell(r.resonance_numeric[0]),
            cell(r.resonance_numeric[1]),
        )?;
    }
    w.flush()?;
    Ok(vec![path])
}

fn leakage(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let l = &cfg.leakage;
    let grid = linspace(l.omega_min.expect("resolved"), l.omega_max.expect("resolved"), l.omega_points);
    let times = linspace(0.0, l.t_max, l.t_points);
    let initial = l.initial.clone().expect("resolved");
    let subspace = l.subspace.clone().expect("resolved");
    let labels: Vec<&str> = subspace.iter().map(String::as_str).collect();
    let template = cfg.pulse.template().with_delta(l.delta.expect("resolved"));
    let lines =
        leakage_spectrum(&cfg.device, &cfg.hilbert, &template, &grid, &times, &initial, &labels, l.threshold, &cfg.scan)?;
    let (path, mut w) = create(out, &format!("leakage_{}.csv", l.gate.name()))?;
    w.write_all(provenance_header(Command::Leakage, cfg).as_bytes())?;
    write_leakage_csv(&mut w, &lines)?;
    w.flush()?;
    eprintln!("{}: {} leakage lines above {:.1e}", l.gate.name(), lines.len(), l.threshold);
    Ok(vec![path])
}

#[derive(Serialize)]
struct HaarCheck {
    samples: usize,
    seed: u64,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct FidelityPoint<'a> {
    report: &'a FidelityReport,
    calibration: &'a CalibratedGate,
    haar_mc: Option<HaarCheck>,
}

fn fidelity(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let f = &cfg.fidelity;
    let rates = if f.dissipation { rates_from_specs(&cfg.device)? } else { DissipationRates::zero() };
    let opts = GateOptions {
        channel: ChannelOptions {
            transfer: cfg.scan.transfer,
            readout: cfg.scan.readout,
            propagation: cfg.scan.propagation,
        },
        search: f.search,
        compensation: f.compensation,
        refine: f.refine,
        angle: f.angle,
        max_duration: f.max_duration,
    };
    let points = gate_error_sweep(&cfg.device, &cfg.hilbert, &rates, f.gate, &cfg.pulse.template(), &f.deltas, &opts)?;
    let ideal = f.gate.ideal_unitary(f.angle);
    let checks: Vec<Option<HaarCheck>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            (f.mc_samples > 0).then(|| {
                let seed = cfg.seed.wrapping_add(i as u64);
                let target = phase_correction(p.report.phases).dot(&ideal);
                let (mean, stderr) = haar_fidelity_mc(&p.channel, &target, f.mc_samples, seed);
                HaarCheck { samples: f.mc_samples, seed, mean, stderr }
            })
        })
        .collect();
    let gate = f.gate.name();
    let (csv, mut w) = create(out, &format!("fidelity_{gate}.csv"))?;
    w.write_all(provenance_header(Command::Fidelity, cfg).as_bytes())?;
    writeln!(w, "delta_phi0,gate_time_ns,fidelity,error,leakage")?;
    for p in &points {
        let r = &p.report;
        writeln!(w, "{},{:.6},{:.12},{:.6e},{:.6e}", r.delta, r.gate_time, r.fidelity, r.error, r.leakage)?;
    }
    w.flush()?;
    let details: Vec<FidelityPoint> = points
        .iter()
        .zip(checks)
        .map(|(p, haar_mc)| FidelityPoint { report: &p.report, calibration: &p.calibration, haar_mc })
        .collect();
    let json = write_json(out, &format!("fidelity_{gate}.json"), Command::Fidelity, cfg, details)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct DeltaScale {
    gate: Gate,
    theta: f64,
    calibration: Calibration,
}

fn calibrate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let c = &cfg.calibrate;
    let pairs: Vec<(f64, f64)> = c.pairs.iter().map(|p| (p[0], p[1])).collect();
    let calibration = calibrate_delta(&pairs, &cfg.device, cfg.pulse.theta, c.gate)?;
    let result = DeltaScale { gate: c.gate, theta: cfg.pulse.theta, calibration };
    let path = write_json(out, &format!("delta_scale_{}.json", c.gate.name()), Command::Calibrate, cfg, result)?;
    Ok(vec![path])
}
