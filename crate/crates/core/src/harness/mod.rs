//! Experiment drivers: single runs, parameter grids, figure data and a
//! quantized gradient-descent demo.

pub mod config;
pub mod demo;
pub mod figures;
pub mod grid;
pub mod run;

pub use config::RunConfig;
pub use demo::{run_demo_gd, run_direct_gd, DemoTrainingConfig, Quantizer};
pub use grid::{run_cases, run_grid, AttackVariant, GridCase, GridReport, GridSpec};
pub use run::{check_bounds, execute, generate_gradients, write_csv, RunRecord, RunResult};
