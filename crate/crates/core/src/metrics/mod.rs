//! Channel reconstruction and Haar-average gate fidelity.

mod calibration;
mod channel;
mod fidelity;

pub use calibration::{calibrate_gate, gate_error_sweep, CalibratedGate, GateOptions, SweepPoint};
pub use channel::{reconstruct_channel, unitary_channel, ChannelOptions, QuantumChannel};
pub use fidelity::{
    average_fidelity, fidelity_report, haar_fidelity_mc, optimize_phases, pauli_basis, phase_correction, Compensation,
    FidelityReport,
};
