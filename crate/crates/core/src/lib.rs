//! High step-up interleaved DC-DC converter toolkit.
//!
//! Models a two-leg interleaved boost converter whose switch nodes drive a
//! four-stage diode-capacitor voltage multiplier ladder (ideal gain
//! `4 / (1 - D)`). The crate provides three cross-validating views of the
//! same circuit:
//!
//! * [`steady_state`] — closed-form operating-point analysis and inverse
//!   design (duty solver, stress and ripple estimates),
//! * [`model`] + [`sim`] — switched linear state-space model of the three
//!   operating modes, integrated per tile by exact matrix-exponential
//!   discretization up to periodic steady state,
//! * [`loss`] — itemized conduction/switching loss model and efficiency
//!   sweeps driven by simulated waveforms.
//!
//! [`metrics`] post-processes steady-state waveforms (averages, RMS, ripple,
//! device stress, balance checks) so the analytic and simulated views can be
//! compared quantitatively.

pub mod error;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod params;
pub mod schedule;
pub mod sim;
pub mod steady_state;

pub use error::Error;
pub use loss::{efficiency_sweep, loss_breakdown, LossReport, SweepPoint};
pub use metrics::{
    balance_checks, periodic_metrics, stress_report, BalanceReport, PeriodicMetrics, StressReport,
};
pub use model::{build_interleaved_vmc_converter, validate_model, SwitchedModel, ValidationReport};
pub use params::{ConverterParams, Parasitics};
pub use schedule::{gate_schedule, GateSchedule, Mode, Tile};
pub use sim::{
    check_diode_consistency, run_to_steady_state, simulate, step_mode, write_waveform_csv,
    ConsistencyReport, InitialState, SimConfig, SteadyStateResult, WaveformSet,
    WAVEFORM_CSV_HEADER,
};
