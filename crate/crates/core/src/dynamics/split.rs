//! Fourth-order split-step propagator for H(t) = D(t) + V.
//!
//! The diagonal flow is integrated exactly through ∫ν_c dt, the constant coupling flow
//! through one eigen-decomposition of V, composed with Yoshida's triple jump. Inside the
//! flat top of a modulated pulse the Hamiltonian is periodic, and long stretches are
//! covered with powers of the one-period propagator.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hamiltonian::SplitHamiltonian;
use crate::linalg::{dagger, herm_eigh, sym_eigh, to_complex};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn yoshida() -> (f64, f64) {
    let c = 2f64.powf(1.0 / 3.0);
    (1.0 / (2.0 - c), -c / (2.0 - c))
}

const GL3_NODES: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

struct StepKernel {
    h: f64,
    /// exp(−i V w1 h) and exp(−i V w0 h).
    k1: Array2<C64>,
    k0: Array2<C64>,
    /// Base-energy phases over the outer and inner diagonal substeps.
    b_outer: Vec<C64>,
    b_inner: Vec<C64>,
}

/// Propagator bound to one split Hamiltonian. Not shared between threads; cheap to build.
pub struct SplitPropagator<'a> {
    ham: &'a SplitHamiltonian,
    max_step: f64,
    q: Array2<C64>,
    qt: Array2<C64>,
    lam: Vec<f64>,
    classes: Vec<usize>,
    class_weight: Vec<f64>,
    kernels: Vec<StepKernel>,
    scratch: Array2<C64>,
}

impl<'a> SplitPropagator<'a> {
    pub fn new(ham: &'a SplitHamiltonian, max_step: f64) -> Self {
        let (lam, q) = sym_eigh(&ham.coupling);
        let q = to_complex(&q);
        let qt = q.t().to_owned();
        let mut class_weight: Vec<f64> = Vec::new();
        let classes = ham
            .weights
            .iter()
            .map(|&w| match class_weight.iter().position(|&c| c == w) {
                Some(p) => p,
                None => {
                    class_weight.push(w);
                    class_weight.len() - 1
                }
            })
            .collect();
        SplitPropagator {
            ham,
            max_step,
            q,
            qt,
            lam,
            classes,
            class_weight,
            kernels: Vec::new(),
            scratch: Array2::zeros((0, 0)),
        }
    }

    pub fn hamiltonian(&self) -> &'a SplitHamiltonian {
        self.ham
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    fn coupling_exp(&self, tau: f64) -> Array2<C64> {
        let mut left = self.q.clone();
        for (mut col, &l) in left.columns_mut().into_iter().zip(&self.lam) {
            let p = C64::from_polar(1.0, -l * tau);
            col.mapv_inplace(|z| z * p);
        }
        polish_unitary(left.dot(&self.qt))
    }

    fn kernel_index(&mut self, h: f64) -> usize {
        if let Some(k) = self.kernels.iter().position(|k| k.h == h) {
            return k;
        }
        if self.kernels.len() >= 8 {
            self.kernels.remove(0);
        }
        let (w1, w0) = yoshida();
        let phases = |tau: f64| self.ham.base.iter().map(|&b| C64::from_polar(1.0, -b * tau)).collect();
        let kernel = StepKernel {
            h,
            k1: self.coupling_exp(w1 * h),
            k0: self.coupling_exp(w0 * h),
            b_outer: phases(0.5 * w1 * h),
            b_inner: phases(0.5 * (w1 + w0) * h),
        };
        self.kernels.push(kernel);
        self.kernels.len() - 1
    }

    /// ∫ν_c over [a, b] by 3-point Gauss–Legendre.
    fn drive_integral(&self, a: f64, b: f64) -> f64 {
        let l = b - a;
        let d = &self.ham.drive;
        l * (GL3_WEIGHTS[0] * d.at(a + GL3_NODES[0] * l)
            + GL3_WEIGHTS[1] * d.at(a + GL3_NODES[1] * l)
            + GL3_WEIGHTS[2] * d.at(a + GL3_NODES[2] * l))
    }

    fn diagonal_flow(&self, states: &mut Array2<C64>, base: &[C64], integral: f64) {
        let cp: Vec<C64> = self.class_weight.iter().map(|&w| C64::from_polar(1.0, -w * integral)).collect();
        for (k, mut row) in states.rows_mut().into_iter().enumerate() {
            let f = base[k] * cp[self.classes[k]];
            row.mapv_inplace(|z| z * f);
        }
    }

    fn apply(&mut self, m: &Array2<C64>, states: &mut Array2<C64>) {
        if self.scratch.dim() != states.dim() {
            self.scratch = Array2::zeros(states.dim());
        }
        general_mat_mul(ONE, m, states, ZERO, &mut self.scratch);
        std::mem::swap(states, &mut self.scratch);
    }

    fn step(&mut self, states: &mut Array2<C64>, t: f64, ki: usize) {
        let (w1, w0) = yoshida();
        let h = self.kernels[ki].h;
        let (co, ci) = (0.5 * w1 * h, 0.5 * (w1 + w0) * h);
        let marks = [t, t + co, t + co + ci, t + co + 2.0 * ci, t + h];
        // Borrow juggling: kernels are not mutated while stepping.
        let kernels = std::mem::take(&mut self.kernels);
        let k = &kernels[ki];
        self.diagonal_flow(states, &k.b_outer, self.drive_integral(marks[0], marks[1]));
        self.apply(&k.k1, states);
        self.diagonal_flow(states, &k.b_inner, self.drive_integral(marks[1], marks[2]));
        self.apply(&k.k0, states);
        self.diagonal_flow(states, &k.b_inner, self.drive_integral(marks[2], marks[3]));
        self.apply(&k.k1, states);
        self.diagonal_flow(states, &k.b_outer, self.drive_integral(marks[3], marks[4]));
        self.kernels = kernels;
    }

    /// Advance the columns of `states` from t0 to t1 with equal steps no longer than max_step.
    pub fn advance(&mut self, states: &mut Array2<C64>, t0: f64, t1: f64) {
        let span = t1 - t0;
        if span <= 0.0 {
            return;
        }
        let n = (span / self.max_step).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let ki = self.kernel_index(h);
        for s in 0..n {
            self.step(states, t0 + s as f64 * h, ki);
        }
    }

    /// U(t1, t0) by direct integration.
    pub fn unitary(&mut self, t0: f64, t1: f64) -> Array2<C64> {
        let mut u = Array2::eye(self.ham.dim());
        self.advance(&mut u, t0, t1);
        u
    }

    /// Propagator table for one period of the flat top starting at `start`.
    pub fn floquet_table(&mut self, start: f64, period: f64, checkpoints: usize) -> FloquetTable {
        let d = self.ham.dim();
        let dt = period / checkpoints as f64;
        let per = (dt / self.max_step).ceil().max(1.0) as usize;
        let h = dt / per as f64;
        let ki = self.kernel_index(h);
        let mut u = Array2::eye(d);
        let mut table = Vec::with_capacity(checkpoints + 1);
        table.push(u.clone());
        for j in 0..checkpoints {
            for s in 0..per {
                self.step(&mut u, start + (j * per + s) as f64 * h, ki);
            }
            u = polish_unitary(u);
            table.push(u.clone());
        }
        FloquetTable { start, period, checkpoints: table, powers: Vec::new() }
    }
}

/// One Newton–Schulz step towards the nearest unitary, U ← U(3 − U†U)/2.
pub fn polish_unitary(u: Array2<C64>) -> Array2<C64> {
    let n = u.nrows();
    let mut m = dagger(&u).dot(&u) * C64::new(-0.5, 0.0);
    for k in 0..n {
        m[[k, k]] += 1.5;
    }
    u.dot(&m)
}

/// Checkpoint propagators C_j = U(start + jP/M, start), j = 0..=M, and binary powers of U_P.
pub struct FloquetTable {
    pub start: f64,
    pub period: f64,
    pub checkpoints: Vec<Array2<C64>>,
    powers: Vec<Array2<C64>>,
}

impl FloquetTable {
    pub fn count(&self) -> usize {
        self.checkpoints.len() - 1
    }

    pub fn one_period(&self) -> &Array2<C64> {
        &self.checkpoints[self.count()]
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.count() as f64
    }

    /// Block propagator from checkpoint j to j+1, C_{j+1} C_j†.
    pub fn block(&self, j: usize) -> Array2<C64> {
        self.checkpoints[j + 1].dot(&dagger(&self.checkpoints[j]))
    }

    /// Apply U_P^n to the columns of `states`.
    pub fn advance_periods(&mut self, states: &mut Array2<C64>, n: u64) {
        if n == 0 {
            return;
        }
        let bits = 64 - n.leading_zeros() as usize;
        if self.powers.is_empty() {
            self.powers.push(self.one_period().clone());
        }
        while self.powers.len() < bits {
            let last = self.powers.last().unwrap();
            let sq = polish_unitary(last.dot(last));
            self.powers.push(sq);
        }
        for b in 0..bits {
            if n >> b & 1 == 1 {
                *states = self.powers[b].dot(states);
            }
        }
    }
}

/// Exact propagator of a constant Hamiltonian, kept in its eigenbasis.
pub struct StaticPropagator {
    vecs: Array2<C64>,
    vecs_h: Array2<C64>,
    vals: Vec<f64>,
}

impl StaticPropagator {
    pub fn new(h: &Array2<C64>) -> Self {
        let (vals, vecs) = herm_eigh(h);
        let vecs_h = dagger(&vecs);
        StaticPropagator { vecs, vecs_h, vals }
    }

    pub fn apply(&self, states: &Array2<C64>, tau: f64) -> Array2<C64> {
        let mut c = self.vecs_h.dot(states);
        for (k, mut row) in c.rows_mut().into_iter().enumerate() {
            let p = C64::from_polar(1.0, -self.vals[k] * tau);
            row.mapv_inplace(|z| z * p);
        }
        self.vecs.dot(&c)
    }

    pub fn unitary(&self, tau: f64) -> Array2<C64> {
        self.apply(&Array2::eye(self.vals.len()), tau)
    }
}
