//! Monte-Carlo experiment harness: TOML configuration, seeded parallel trial
//! execution and CSV/JSON output.
//!
//! Every trial draws from its own ChaCha8 streams seeded from the master
//! seed, the trial index and (for noise and data) the sweep index. Channel
//! realisations are therefore shared by all sweep points, and the output does
//! not depend on the number of worker threads.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, GridConfig, Mode, SerConfig};
pub use output::{
    config_hash, render_csv, render_manifest, write_outputs, CONFIG_FILE, MANIFEST_FILE,
    RESULTS_FILE,
};
pub use run::{
    derive_seed, mean_stderr, run_experiment, run_experiment_with_threads, ExperimentResult,
    SummaryRow, TrialOutcome, TrialRecord,
};
