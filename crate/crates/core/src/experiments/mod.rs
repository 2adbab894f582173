//! Monte Carlo harness: separated spike draws, whitened amplitudes,
//! worst-case sweeps over the separation or the PSF width, and a
//! finite-difference verification of the analytic Jacobians.

mod output;
mod sampling;
mod sweeps;
mod verify;

pub use output::{read_records_csv, records_to_csv, sidecar_path, write_atomic, write_sweep, CSV_HEADER};
pub use sampling::{sample_separated_spikes, sample_whitened_amplitudes, trial_rng, MAX_REJECTIONS};
pub use sweeps::{
    preset_deltas, run_delta_sweep, run_sigma_sweep, run_sweep, run_trial, Sweep, SweepConfig, SweepRecord,
    TrialOutcome, THREADS_ENV,
};
pub use verify::{expansion_order, verify_jacobian, CheckResult, VerifyConfig, VerifyReport};
