use super::*;
use crate::device::{DeviceSpec, FluxPulse, Transfer};
use crate::hamiltonian::{circuit_hamiltonian, HilbertConfig};
use crate::linalg::{max_abs_diff, min_eigenvalue};
use approx::assert_relative_eq;
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn basis_state(dim: usize, k: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    v[k] = c(1.0);
    v
}

fn small_circuit(delta: f64, nu: f64, duration: f64) -> SplitHamiltonian {
    let p = FluxPulse::new(-0.108, delta, nu, duration);
    circuit_hamiltonian(&DeviceSpec::reference(), &HilbertConfig::uniform(2), &p, Transfer::Exact).unwrap()
}

#[test]
fn zero_hamiltonian_keeps_state() {
    let h = DenseHamiltonian::new(3, |_| Array2::zeros((3, 3)));
    let psi = Array1::from(vec![c(0.6), C64::new(0.0, 0.8), c(0.0)]);
    let traj = propagate_schrodinger(&h, &psi, &[0.0, 1.0, 50.0], &PropagationOptions::default()).unwrap();
    if let States::Pure(v) = &traj.states {
        for s in v {
            assert!(s.iter().zip(psi.iter()).all(|(a, b)| (a - b).norm() < 1e-15));
        }
    }
}

#[test]
fn static_rabi_closed_form() {
    let v = 0.0123;
    let w = 2.0 * PI * v;
    let h = DenseHamiltonian::new(2, move |_| array![[c(0.0), c(w)], [c(w), c(0.0)]]);
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 2.5).collect();
    let traj = propagate_schrodinger(&h, &basis_state(2, 0), &grid, &PropagationOptions::default()).unwrap();
    for (s, &t) in grid.iter().enumerate() {
        assert!((traj.population(s, 1) - (w * t).sin().powi(2)).abs() < 1e-6);
    }
}

#[test]
fn split_matches_rk4_reference() {
    let ham = small_circuit(0.08, 0.58, 60.0);
    let grid = [0.0, 7.5, 21.0, 33.3, 45.0, 59.0];
    let psi = basis_state(8, 4);
    let split = propagate_schrodinger(&ham, &psi, &grid, &PropagationOptions::default()).unwrap();
    let dense = DenseHamiltonian::new(8, |t| ham.matrix_at(t));
    let fine = PropagationOptions { max_step: Some(2e-4), ..Default::default() };
    let reference = propagate_schrodinger(&dense, &psi, &grid, &fine).unwrap();
    for s in 0..grid.len() {
        for k in 0..8 {
            assert!((split.population(s, k) - reference.population(s, k)).abs() < 1e-8);
        }
    }
}

#[test]
fn floquet_sampling_matches_direct() {
    let ham = small_circuit(0.08, 0.58, 200.0);
    let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 6.6).collect();
    let psi = basis_state(8, 4);
    let fast = propagate_schrodinger(&ham, &psi, &grid, &PropagationOptions::default()).unwrap();
    let direct =
        propagate_schrodinger(&ham, &psi, &grid, &PropagationOptions { floquet: false, ..Default::default() }).unwrap();
    for s in 0..grid.len() {
        for k in 0..8 {
            assert!((fast.population(s, k) - direct.population(s, k)).abs() < 1e-9);
        }
    }
}

#[test]
fn step_halving_converges() {
    let ham = small_circuit(0.1, 0.58, 300.0);
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 15.0).collect();
    let psi = basis_state(8, 4);
    let opts = PropagationOptions::default();
    let a = propagate_schrodinger(&ham, &psi, &grid, &opts).unwrap();
    let b = propagate_schrodinger(&ham, &psi, &grid, &opts.halved(&ham)).unwrap();
    for s in 0..grid.len() {
        for k in 0..8 {
            assert!((a.population(s, k) - b.population(s, k)).abs() < 1e-6);
        }
    }
}

#[test]
fn invalid_inputs() {
    let ham = small_circuit(0.05, 0.58, 100.0);
    let psi = basis_state(8, 0);
    let opts = PropagationOptions::default();
    assert!(propagate_schrodinger(&ham, &psi, &[], &opts).is_err());
    assert!(propagate_schrodinger(&ham, &psi, &[1.0, 0.5], &opts).is_err());
    assert!(propagate_schrodinger(&ham, &(&psi * c(2.0)), &[0.0, 1.0], &opts).is_err());
}

#[test]
fn rates_from_table_values() {
    let d = DeviceSpec::reference();
    let r = rates_from_specs(&d).unwrap();
    assert_relative_eq!(r.q1.gamma_minus, 1.0 / 71_000.0);
    assert_relative_eq!(r.q1.gamma_z, 0.5 * (1.0 / 52_000.0 - 1.0 / 142_000.0), max_relative = 1e-12);
    assert_relative_eq!(r.q2.gamma_z, 0.5 * (1.0 / 32_000.0 - 1.0 / 118_000.0), max_relative = 1e-12);
    assert_eq!(r.coupler.gamma_z, 0.0);

    let mut q = d.q1;
    q.t2 = Some(2.0 * q.t1.unwrap());
    assert_eq!(transmon_rates(&q, "q").unwrap().gamma_z, 0.0);
    q.t2 = Some(2.5 * q.t1.unwrap());
    assert!(transmon_rates(&q, "q").is_err());
    q.t1 = None;
    assert!(transmon_rates(&q, "q").is_err());
}

#[test]
fn population_helpers() {
    let cfg = HilbertConfig::uniform(2);
    let basis = LabeledBasis::new(&cfg);
    let k = basis.parse("100").unwrap();
    let traj = Trajectory { times: vec![0.0], states: States::Pure(vec![basis_state(8, k)]) };
    assert_eq!(populations_by_label(&traj, &basis, &["100"]).unwrap()[0][0], 1.0);
    let mixed = Trajectory { times: vec![0.0], states: States::Mixed(vec![Array2::eye(8) / c(8.0)]) };
    for p in populations(&mixed, &(0..8).collect::<Vec<_>>()) {
        assert_relative_eq!(p[0], 0.125);
    }
    assert_relative_eq!(mixed.total_population(0), 1.0);
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &traj, &basis, &[k, 0]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time_ns,p100,p000\n0,1.0"));
}

fn single_transmon_zero_h(levels: usize) -> DenseHamiltonian<impl Fn(f64) -> Array2<C64> + Sync> {
    DenseHamiltonian::new(levels, move |_| Array2::zeros((levels, levels)))
}

#[test]
fn amplitude_damping_closed_form() {
    let rates = TransmonRates { gamma_minus: 1.0 / 71_000.0, gamma_z: 0.0 };
    let diss = Dissipator::single(2, rates);
    let rho0 = array![[c(0.0), c(0.0)], [c(0.0), c(1.0)]];
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 10_000.0).collect();
    let opts = PropagationOptions { max_step: Some(50.0), ..Default::default() };
    let traj = propagate_lindblad(&single_transmon_zero_h(2), &rho0, &diss, &grid, &opts).unwrap();
    for (s, &t) in grid.iter().enumerate() {
        assert!((traj.population(s, 1) - (-t / 71_000.0).exp()).abs() < 1e-6);
    }
}

#[test]
fn coherence_decay_follows_rate_definitions() {
    let spec = DeviceSpec::reference().q2;
    let rates = transmon_rates(&spec, "q2").unwrap();
    let diss = Dissipator::single(2, rates);
    let rho0 = Array2::from_elem((2, 2), c(0.5));
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 5_000.0).collect();
    let opts = PropagationOptions { max_step: Some(50.0), ..Default::default() };
    let traj = propagate_lindblad(&single_transmon_zero_h(2), &rho0, &diss, &grid, &opts).unwrap();
    let decay = 0.5 * (rates.gamma_minus + rates.gamma_z);
    if let States::Mixed(r) = &traj.states {
        for (s, &t) in grid.iter().enumerate() {
            assert!((r[s][[0, 1]].re - 0.5 * (-decay * t).exp()).abs() < 1e-6);
        }
    }
}

#[test]
fn lindblad_without_rates_matches_schrodinger() {
    let ham = small_circuit(0.08, 0.58, 150.0);
    let grid: Vec<f64> = (0..=15).map(|k| k as f64 * 10.0).collect();
    let psi = basis_state(8, 4);
    let pure = propagate_schrodinger(&ham, &psi, &grid, &PropagationOptions::default()).unwrap();
    let rho0 = {
        let col = psi.clone().insert_axis(ndarray::Axis(1));
        col.dot(&col.t().mapv(|z| z.conj()))
    };
    let diss = Dissipator::none(8);
    let mixed = propagate_lindblad(&ham, &rho0, &diss, &grid, &PropagationOptions::default()).unwrap();
    for s in 0..grid.len() {
        for k in 0..8 {
            assert!((pure.population(s, k) - mixed.population(s, k)).abs() < 1e-7);
        }
    }
}

#[test]
fn lindblad_split_matches_dense_reference() {
    let ham = small_circuit(0.08, 0.58, 60.0);
    let rates = DissipationRates {
        q1: TransmonRates { gamma_minus: 2e-3, gamma_z: 1e-3 },
        q2: TransmonRates { gamma_minus: 1e-3, gamma_z: 3e-3 },
        coupler: TransmonRates { gamma_minus: 5e-3, gamma_z: 2e-3 },
    };
    let diss = Dissipator::for_circuit(&HilbertConfig::uniform(2), &rates).unwrap();
    let mut rho0 = Array2::zeros((8, 8));
    rho0[[4, 4]] = c(0.5);
    rho0[[2, 2]] = c(0.5);
    rho0[[4, 2]] = c(0.5);
    rho0[[2, 4]] = c(0.5);
    let grid = [0.0, 12.0, 30.5, 44.0, 59.0];
    let split = propagate_lindblad(&ham, &rho0, &diss, &grid, &PropagationOptions { lindblad_block: 0.025, ..Default::default() }).unwrap();
    let dense = DenseHamiltonian::new(8, |t| ham.matrix_at(t));
    let fine = PropagationOptions { max_step: Some(4e-4), ..Default::default() };
    let reference = propagate_lindblad(&dense, &rho0, &diss, &grid, &fine).unwrap();
    if let (States::Mixed(a), States::Mixed(b)) = (&split.states, &reference.states) {
        for (x, y) in a.iter().zip(b) {
            assert!(max_abs_diff(x, y) < 2e-6, "{}", max_abs_diff(x, y));
            assert!(min_eigenvalue(x) > -1e-8);
        }
    }
}

#[test]
fn lindblad_window_blocks_match_direct_blocks() {
    let ham = small_circuit(0.08, 0.58, 120.0);
    let rates = DissipationRates {
        q1: TransmonRates { gamma_minus: 2e-3, gamma_z: 1e-3 },
        q2: TransmonRates { gamma_minus: 1e-3, gamma_z: 3e-3 },
        coupler: TransmonRates { gamma_minus: 5e-3, gamma_z: 2e-3 },
    };
    let diss = Dissipator::for_circuit(&HilbertConfig::uniform(2), &rates).unwrap();
    let mut rho0 = Array2::zeros((8, 8));
    rho0[[4, 4]] = c(1.0);
    let grid = [0.0, 25.0, 61.3, 99.0, 101.0, 119.0];
    let opts = PropagationOptions::default();
    let a = propagate_lindblad(&ham, &rho0, &diss, &grid, &opts).unwrap();
    let b = propagate_lindblad(&ham, &rho0, &diss, &grid, &PropagationOptions { floquet: false, ..opts }).unwrap();
    for s in 0..grid.len() {
        for k in 0..8 {
            assert!((a.population(s, k) - b.population(s, k)).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norm_is_conserved(delta in 0.0f64..0.2, nu in 0.2f64..3.0, t_end in 41.0f64..120.0, k in 0usize..8) {
        let ham = small_circuit(delta, nu, t_end);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * t_end / 10.0).collect();
        let traj = propagate_schrodinger(&ham, &basis_state(8, k), &grid, &PropagationOptions::default()).unwrap();
        for s in 0..grid.len() {
            prop_assert!((traj.total_population(s) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn lindblad_trace_and_positivity(g1 in 0.0f64..5e-3, gz in 0.0f64..5e-3, t_end in 41.0f64..80.0) {
        let ham = small_circuit(0.06, 0.58, t_end);
        let r = TransmonRates { gamma_minus: g1, gamma_z: gz };
        let diss = Dissipator::for_circuit(&HilbertConfig::uniform(2), &DissipationRates { q1: r, q2: r, coupler: r }).unwrap();
        let mut rho0 = Array2::zeros((8, 8));
        rho0[[6, 6]] = c(1.0);
        let grid = [0.0, 0.5 * t_end, t_end];
        let traj = propagate_lindblad(&ham, &rho0, &diss, &grid, &PropagationOptions::default()).unwrap();
        if let States::Mixed(rs) = &traj.states {
            for rho in rs {
                prop_assert!((crate::linalg::trace(rho).re - 1.0).abs() < 1e-8);
                prop_assert!(min_eigenvalue(rho) > -1e-8);
            }
        }
    }
}
