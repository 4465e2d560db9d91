//! Delay-Doppler domain channel estimation for OTFS links with fractional
//! delay and Doppler.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] – frame geometry, the `N x M` complex grid container and the
//!   column-wise `vec`/`invec` operators.
//! * [`channel`] – effective-channel synthesis from path parameters, the
//!   circular-convolution input/output relation, AWGN and random scenarios.
//! * [`transceiver`] – single-impulse pilot frames, effective-channel recovery,
//!   QAM data frames and an LMMSE detector.
//! * [`estimator`] – peak extraction, magnitude template matching for the
//!   fractional delay/Doppler, gain inversion, energy-leakage scoring and the
//!   leakage-ordered sequential interference cancellation loop.
//! * [`metrics`] – NMSE, parameter MSE with path association, SER and the
//!   brute-force joint-search oracle.
//! * [`harness`] – seeded Monte-Carlo experiment runner and its CSV/JSON output.

pub mod channel;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod transceiver;

pub use channel::{
    add_awgn, apply_channel, generate_dd_channel, periodic_sum_kernel, sample_scenario,
    NoiseConfig, ScenarioConfig,
};
pub use error::{Error, Result};
pub use estimator::{
    estimate_delay_doppler, estimate_gain, estimate_sequential, extract_paths, leakage_score,
    reconstruct_channel, reconstruct_path_channel, Estimator, PathEstimate, SearchConfig,
    TapLocation, TemplateBank,
};
pub use grid::{
    invec, physical_units, vec, wrap_delay, wrap_doppler, DdGrid, DdMatrix, PathParams,
    PhysicalUnits,
};
pub use harness::{run_experiment, ExperimentConfig, ExperimentResult, Mode};
pub use metrics::{
    associate_and_score, associate_and_score_gated, joint_grid_oracle, nmse_db, ser, TrialScore,
};
pub use num_complex::Complex64;
pub use transceiver::{
    build_effective_matrix, lmmse_detect, make_data_frame, make_pilot_frame,
    recover_effective_channel, Constellation, DataFrame, PilotConfig,
};
