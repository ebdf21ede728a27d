//! Experiment harness: scenario files, populations, budget sweeps and their
//! CSV/SVG output.

mod config;
mod plot;
mod population;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::mechanism::{MechanismError, MechanismKind};
use crate::microsim::SimError;
use crate::prefs::PrefsError;

pub use config::{
    load_scenario, parse_scenario, BudgetSweep, ConditionGrid, ExecutionNoise, PopulationClass,
    PopulationSpec, Preference, ScenarioConfig, AUTO_BUDGET_HEADROOM, DEFAULT_BUDGET_STEPS,
    DEFAULT_EPSILON_FRACTION,
};
pub use plot::emit_plot;
pub use population::{
    build_population, class_feasibility, compute_feasible_sets, read_feasible_sets,
    write_feasible_sets, ClassFeasibility, ClassKey, FeasibleSetCache, Population, RouteSamples,
};
pub use sweep::{
    emit_csv, read_sweep_csv, resolve_budgets, run_budget_sweep, run_budget_sweep_with,
    sweep_budgets, write_sweep_csv, SweepPoint, SweepReport, SweepRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("failed to parse {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("class {class}: {source}")]
    Simulation {
        class: String,
        #[source]
        source: SimError,
    },
    #[error("class {class}: {source}")]
    Geometry {
        class: String,
        #[source]
        source: GeometryError,
    },
    #[error("user {user}: {source}")]
    Preference {
        user: String,
        #[source]
        source: PrefsError,
    },
    #[error("user {user}: {source}")]
    Participant {
        user: String,
        #[source]
        source: MechanismError,
    },
    #[error("{mechanism} mechanism at budget {budget}: {source}")]
    Mechanism {
        budget: f64,
        mechanism: MechanismKind,
        #[source]
        source: MechanismError,
    },
    #[error("feasible-set cache: {0}")]
    Cache(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error("nothing to write: the sweep table is empty")]
    EmptyTable,
}

impl HarnessError {
    /// Errors caused by the user's input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Parse { .. }
                | HarnessError::Invalid(_)
                | HarnessError::Preference {
                    source: PrefsError::OutOfRange { .. },
                    ..
                }
        )
    }

    fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
