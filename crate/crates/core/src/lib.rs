//! Simulation and stability analysis of regime-switching discrete-time
//! dynamical systems `x_{t+1} = F_{s_t}(x_t)`.
//!
//! Words of regimes are written in application order: `w = s₀ s₁ … s_{k-1}`
//! applies `F_{s₀}` first, and the linearized product is `A_{s_{k-1}} ⋯ A_{s₀}`.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod jsr;
pub mod linalg;
pub mod operator;
pub mod reference_example;
pub mod report;
pub mod scenario;
pub mod signal;
pub mod state;
pub mod structure;

pub use dynamics::{RegimeId, RegimeSystem, Trajectory};
pub use error::{Error, NumericalError, Result};
pub use linalg::{Matrix, MatrixNorm};
pub use operator::{CollateralParams, RegimeOperator, Side};
pub use report::{emit_report, run_scenario, AnalysisReport, RunOptions};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError, ScenarioFile};
pub use signal::SwitchingSignal;
pub use state::StateVector;
