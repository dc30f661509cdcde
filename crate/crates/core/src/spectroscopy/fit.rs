//! Spectral peak search and damped-cosine least squares.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::solve;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPeak {
    /// GHz.
    pub frequency: f64,
    pub magnitude: f64,
    /// Median spectral magnitude.
    pub floor: f64,
}

fn uniform_step(t: &[f64]) -> Result<f64> {
    let n = t.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::invalid("series", "times must increase"));
    }
    for (k, &x) in t.iter().enumerate() {
        if (x - t[0] - k as f64 * dt).abs() > 1e-6 * dt {
            return Err(Error::invalid("series", "times must be uniformly spaced"));
        }
    }
    Ok(dt)
}

/// Strongest non-DC line of a uniformly sampled real series: mean removed, Hann window,
/// zero padding ×8, quadratic interpolation of the magnitude around the peak bin.
pub fn spectral_peak(t: &[f64], y: &[f64]) -> Result<Option<SpectralPeak>> {
    if t.len() != y.len() || t.len() < 4 {
        return Err(Error::invalid("series", "need at least 4 samples of equal length"));
    }
    let dt = uniform_step(t)?;
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let spread = y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if !(spread > 1e-12 * (1.0 + mean.abs())) {
        return Ok(None);
    }
    let len = n.next_power_of_two() * 8;
    let mut buf: Vec<C64> = (0..len)
        .map(|k| {
            if k < n {
                let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos();
                C64::new((y[k] - mean) * w, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let mag: Vec<f64> = buf[..len / 2 + 1].iter().map(|z| z.norm()).collect();
    // Skip the main lobe of the DC term (Hann half-width is 2 unpadded bins).
    let start = 16.min(mag.len() - 2);
    let (kmax, &peak) = mag.iter().enumerate().skip(start).max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let mut sorted = mag[start..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    if !(peak > 0.0) {
        return Ok(None);
    }
    let shift = if kmax > 0 && kmax + 1 < mag.len() {
        let (a, b, c) = (mag[kmax - 1], mag[kmax], mag[kmax + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            (0.5 * (a - c) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(Some(SpectralPeak { frequency: (kmax as f64 + shift) / (len as f64 * dt), magnitude: peak, floor }))
}

/// p(t) = offset + amplitude·e^{−decay·t}·cos(2π·frequency·t + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationFit {
    /// GHz.
    pub frequency: f64,
    /// 1/ns.
    pub decay: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub phase: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub iterations: usize,
}

impl OscillationFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (-self.decay * t).exp() * (2.0 * PI * self.frequency * t + self.phase).cos()
    }
}

const MAX_ITERATIONS: usize = 500;
/// Peak-to-median ratio of the windowed spectrum below which a series counts as flat.
const PEAK_CONTRAST: f64 = 5.0;

fn wrap(phi: f64) -> f64 {
    let p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p - 2.0 * PI
    } else {
        p
    }
}

/// Levenberg–Marquardt fit of a damped cosine, started from the spectral peak and a linear
/// least-squares amplitude/phase guess. Frequency is bounded to [0, Nyquist], decay ≥ 0 and
/// amplitude ≥ 0 (a negative amplitude is absorbed into the phase).
pub fn fit_damped_oscillation(t: &[f64], y: &[f64]) -> Result<OscillationFit> {
    if t.len() != y.len() {
        return Err(Error::invalid("series", "time and value lengths differ"));
    }
    if t.len() < 8 {
        return Err(Error::invalid("series", format!("need at least 8 samples, got {}", t.len())));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series", "values must be finite"));
    }
    let dt = uniform_step(t)?;
    let nyquist = 0.5 / dt;
    let span = t[t.len() - 1] - t[0];
    let peak = match spectral_peak(t, y)? {
        Some(p) if p.magnitude > PEAK_CONTRAST * p.floor => p,
        _ => return Err(Error::FitFailed("no oscillation detected".into())),
    };
    if peak.frequency * span < 1.0 {
        return Err(Error::FitFailed(format!(
            "series spans {:.2} periods of the dominant line; at least one is required",
            peak.frequency * span
        )));
    }
    let t0 = t[0];
    let tau: Vec<f64> = t.iter().map(|x| x - t0).collect();
    let n = y.len();

    // Linear guess of offset and quadrature amplitudes at the peak frequency.
    let w0 = 2.0 * PI * peak.frequency;
    let mut ata = ndarray::Array2::<f64>::zeros((3, 3));
    let mut atb = [0.0; 3];
    for (k, &s) in tau.iter().enumerate() {
        let row = [1.0, (w0 * s).cos(), (w0 * s).sin()];
        for a in 0..3 {
            atb[a] += row[a] * y[k];
            for b in 0..3 {
                ata[[a, b]] += row[a] * row[b];
            }
        }
    }
    let lin = solve(&ata, &atb).ok_or_else(|| Error::FitFailed("singular initial design".into()))?;
    // a cos + b sin = A cos(wt + φ) with A cos φ = a, −A sin φ = b.
    let mut p = [lin[0], lin[1].hypot(lin[2]), 0.0, peak.frequency, (-lin[2]).atan2(lin[1])];

    let residuals = |p: &[f64; 5], out: &mut Vec<f64>| {
        out.clear();
        for (k, &s) in tau.iter().enumerate() {
            out.push(p[0] + p[1] * (-p[2] * s).exp() * (2.0 * PI * p[3] * s + p[4]).cos() - y[k]);
        }
    };
    let project = |p: &mut [f64; 5]| {
        if p[1] < 0.0 {
            p[1] = -p[1];
            p[4] += PI;
        }
        if p[2] < 0.0 {
            p[2] = 0.0;
        }
        if p[3] < 0.0 {
            p[3] = -p[3];
            p[4] = -p[4];
        }
        if p[3] > nyquist {
            p[3] = nyquist;
        }
        p[4] = wrap(p[4]);
    };
    let cost_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut r = Vec::with_capacity(n);
    residuals(&p, &mut r);
    let mut cost = cost_of(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut trial_r = Vec::with_capacity(n);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = ndarray::Array2::<f64>::zeros((5, 5));
        let mut jtr = [0.0; 5];
        for (k, &s) in tau.iter().enumerate() {
            let e = (-p[2] * s).exp();
            let arg = 2.0 * PI * p[3] * s + p[4];
            let (c, sn) = (arg.cos(), arg.sin());
            let j = [1.0, e * c, -s * p[1] * e * c, -2.0 * PI * s * p[1] * e * sn, -p[1] * e * sn];
            for a in 0..5 {
                jtr[a] += j[a] * r[k];
                for b in a..5 {
                    jtj[[a, b]] += j[a] * j[b];
                }
            }
        }
        for a in 0..5 {
            for b in 0..a {
                jtj[[a, b]] = jtj[[b, a]];
            }
        }
        let mut improved = false;
        while mu < 1e16 {
            let mut m = jtj.clone();
            for a in 0..5 {
                m[[a, a]] += mu * jtj[[a, a]].max(1e-300);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve(&m, &rhs) else {
                mu *= 10.0;
                continue;
            };
            let mut trial = p;
            for a in 0..5 {
                trial[a] += step[a];
            }
            project(&mut trial);
            residuals(&trial, &mut trial_r);
            let trial_cost = cost_of(&trial_r);
            if trial_cost < cost {
                let gain = (cost - trial_cost) / cost.max(1e-300);
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if gain < 1e-13 || cost < 1e-28 * n as f64 {
                    converged = true;
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // No descent direction left: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed(format!("no convergence after {MAX_ITERATIONS} iterations")));
    }
    let (offset, amp, decay, frequency, phi) = (p[0], p[1], p[2], p[3], p[4]);
    Ok(OscillationFit {
        frequency,
        decay,
        amplitude: amp * (decay * t0).exp(),
        offset,
        phase: wrap(phi - 2.0 * PI * frequency * t0),
        residual: (cost / n as f64).sqrt(),
        iterations,
    })
}
