//! Verification lab: exact `Delta`, constant calibration, rate and CLT
//! experiments, identity checks and sweeps over parameter grids.

pub mod calibrate;
pub mod delta;
pub mod experiments;
pub mod grid;
pub mod stirling_check;
pub mod sweep;
pub mod verify;

pub use calibrate::calibrate_constants;
pub use delta::{delta_exact, delta_star_at, DeltaReport, JumpDeviation, JumpTable, Side};
pub use experiments::{clt_experiment, duality_suite, mode_law, optimality_check};
pub use grid::{GridInstance, Rule, SweepGrid};
pub use sweep::{run_sweep, write_csv, SweepRow};
