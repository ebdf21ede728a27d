//! Scenario files: TOML parsing, defaults and validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::microsim::{DrivingStyle, SimConfig, TrafficCondition, VehicleType};
use crate::netgraph::{Control, Network, NetworkSpec};
use crate::prefs::{DEFAULT_GRID, DEFAULT_REFINEMENTS};

pub const DEFAULT_BUDGET_STEPS: usize = 50;
pub const DEFAULT_EPSILON_FRACTION: f64 = 0.02;
/// Automatic sweep maximum, as a multiple of `n · max threshold`.
pub const AUTO_BUDGET_HEADROOM: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Tradeoff(f64),
    PreferredTime(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationClass {
    pub origin: String,
    pub destination: String,
    pub vehicle: String,
    pub preference: Preference,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub classes: Vec<PopulationClass>,
    /// Grid size and refinement rounds for preferred-time reports.
    pub grid: usize,
    pub refinements: usize,
}

impl PopulationSpec {
    pub fn size(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSweep {
    pub min: f64,
    /// `None`: chosen from the population's compliance thresholds.
    pub max: Option<f64>,
    pub steps: usize,
}

impl BudgetSweep {
    /// Evenly spaced budgets from `min` to `max`.
    pub fn budgets(&self, max: f64) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    max
                } else {
                    self.min + (max - self.min) * i as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    /// Include the unperturbed condition (network signal offsets, no leader).
    pub free_flow: bool,
    pub explicit: Vec<TrafficCondition>,
    /// Number of conditions with uniformly drawn signal offsets.
    pub random: usize,
    pub seed: u64,
}

impl ConditionGrid {
    /// Free flow first, then explicit entries, then random draws.
    pub fn resolve(&self, spec: &NetworkSpec) -> Vec<TrafficCondition> {
        let mut out = Vec::new();
        if self.free_flow {
            out.push(TrafficCondition::default());
        }
        out.extend(self.explicit.iter().cloned());
        let mut signals: Vec<(&str, f64)> = spec
            .links
            .iter()
            .filter_map(|l| match l.control {
                Control::Signal { cycle, .. } => Some((l.id.as_str(), cycle)),
                _ => None,
            })
            .collect();
        signals.sort_by(|a, b| a.0.cmp(b.0));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random {
            let signal_offsets = signals
                .iter()
                .map(|&(id, cycle)| (id.to_string(), rng.random_range(0.0..cycle)))
                .collect();
            out.push(TrafficCondition {
                signal_offsets,
                leader: None,
                seed: rng.random(),
            });
        }
        out
    }
}

/// Multiplicative Gaussian noise on realized outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionNoise {
    /// Standard deviation relative to each coordinate.
    pub relative_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub network: NetworkSpec,
    pub vehicles: Vec<VehicleType>,
    pub sim: SimConfig,
    pub routes: usize,
    pub seed: u64,
    pub epsilon_fraction: f64,
    pub styles: Vec<DrivingStyle>,
    pub conditions: ConditionGrid,
    pub population: PopulationSpec,
    pub budget: BudgetSweep,
    pub noise: Option<ExecutionNoise>,
    pub output_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn vehicle(&self, id: &str) -> Option<&VehicleType> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn traffic_conditions(&self) -> Vec<TrafficCondition> {
        self.conditions.resolve(&self.network)
    }

    /// Replaces the master seed and every seed derived from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.conditions.seed = seed;
        if let Some(noise) = self.noise.as_mut() {
            noise.seed = seed;
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    simulation: RawSimulation,
    network: NetworkSpec,
    vehicles: Vec<VehicleType>,
    styles: Option<RawStyles>,
    conditions: Option<RawConditions>,
    population: RawPopulation,
    budget: Option<RawBudget>,
    noise: Option<RawNoise>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: Option<f64>,
    horizon: Option<f64>,
    stop_dwell: Option<f64>,
    routes: Option<i64>,
    seed: Option<u64>,
    epsilon_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStyles {
    speed_scales: Vec<f64>,
    accel_scales: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConditions {
    free_flow: Option<bool>,
    #[serde(default)]
    explicit: Vec<TrafficCondition>,
    random: Option<i64>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPopulation {
    n: Option<i64>,
    classes: Vec<RawClass>,
    grid: Option<i64>,
    refinements: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    origin: String,
    destination: String,
    vehicle: String,
    tradeoff: Option<f64>,
    preferred_time: Option<f64>,
    count: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    min: Option<f64>,
    max: Option<f64>,
    steps: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    relative_std: f64,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: PathBuf,
}

/// Reads and validates a scenario file. Also returns one note per default
/// that was filled in.
pub fn load_scenario(path: &Path) -> Result<(ScenarioConfig, Vec<String>), HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    parse_scenario(&text, &name).map_err(|e| match e {
        HarnessError::Parse { message, .. } => HarnessError::Parse {
            source_name: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parses scenario TOML text; `default_name` is used when the file has no
/// `name` key.
pub fn parse_scenario(
    text: &str,
    default_name: &str,
) -> Result<(ScenarioConfig, Vec<String>), HarnessError> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| HarnessError::Parse {
        source_name: default_name.to_string(),
        message: e.to_string(),
    })?;
    let mut notes = Vec::new();
    let mut issues = Vec::new();

    let sim_defaults = SimConfig::default();
    let s = &raw.simulation;
    let dt = s.dt.unwrap_or_else(|| {
        notes.push(format!("simulation.dt not set, using {}", sim_defaults.dt));
        sim_defaults.dt
    });
    if !(dt > 0.0 && dt <= 0.5) {
        issues.push(format!("simulation.dt = {dt} must lie in (0, 0.5]"));
    }
    let horizon = s.horizon.unwrap_or_else(|| {
        notes.push(format!(
            "simulation.horizon not set, using {} s",
            sim_defaults.horizon
        ));
        sim_defaults.horizon
    });
    if !(horizon > 0.0) {
        issues.push(format!("simulation.horizon = {horizon} must be positive"));
    }
    let stop_dwell = s.stop_dwell.unwrap_or(sim_defaults.stop_dwell);
    if !(stop_dwell >= 0.0) {
        issues.push(format!(
            "simulation.stop_dwell = {stop_dwell} must be non-negative"
        ));
    }
    let routes = s.routes.unwrap_or_else(|| {
        notes.push("simulation.routes not set, using 2".into());
        2
    });
    if routes < 1 {
        issues.push(format!("simulation.routes = {routes} must be at least 1"));
    }
    let seed = s.seed.unwrap_or_else(|| {
        notes.push("simulation.seed not set, using 0".into());
        0
    });
    let epsilon_fraction = s.epsilon_fraction.unwrap_or_else(|| {
        notes.push(format!(
            "simulation.epsilon_fraction not set, using {DEFAULT_EPSILON_FRACTION}"
        ));
        DEFAULT_EPSILON_FRACTION
    });
    if !(epsilon_fraction >= 0.0 && epsilon_fraction.is_finite()) {
        issues.push(format!(
            "simulation.epsilon_fraction = {epsilon_fraction} must be non-negative"
        ));
    }

    let network = raw.network;
    if let Err(e) = Network::build(&network) {
        issues.push(format!("network: {e}"));
    }
    let links: BTreeSet<&str> = network.links.iter().map(|l| l.id.as_str()).collect();

    let mut vehicle_ids = BTreeSet::new();
    if raw.vehicles.is_empty() {
        issues.push("vehicles: at least one vehicle type is required".into());
    }
    for v in &raw.vehicles {
        if !vehicle_ids.insert(v.id.as_str()) {
            issues.push(format!("vehicles: duplicate id `{}`", v.id));
        }
        if let Err(e) = v.validate() {
            issues.push(format!("vehicles: {e}"));
        }
    }

    let styles = match raw.styles {
        Some(st) => {
            if st.speed_scales.is_empty() || st.accel_scales.is_empty() {
                issues.push("styles: speed_scales and accel_scales must be nonempty".into());
            }
            let grid: Vec<DrivingStyle> = st
                .speed_scales
                .iter()
                .flat_map(|&s| {
                    st.accel_scales.iter().map(move |&a| DrivingStyle {
                        speed_scale: s,
                        accel_scale: a,
                    })
                })
                .collect();
            for g in &grid {
                if let Err(e) = g.validate() {
                    issues.push(format!("styles: {e}"));
                }
            }
            grid
        }
        None => {
            notes.push("styles not set, using normal driving only".into());
            vec![DrivingStyle::NORMAL]
        }
    };

    let conditions = match raw.conditions {
        Some(c) => {
            let random = c.random.unwrap_or(0);
            if random < 0 {
                issues.push(format!("conditions.random = {random} must be non-negative"));
            }
            for (i, cond) in c.explicit.iter().enumerate() {
                for (link, offset) in &cond.signal_offsets {
                    if !links.contains(link.as_str()) {
                        issues.push(format!("conditions.explicit[{i}]: unknown link `{link}`"));
                    } else if !(offset.is_finite() && *offset >= 0.0) {
                        issues.push(format!("conditions.explicit[{i}]: offset {offset} for `{link}` must be non-negative"));
                    }
                }
            }
            let grid = ConditionGrid {
                free_flow: c.free_flow.unwrap_or(true),
                explicit: c.explicit,
                random: random.max(0) as usize,
                seed: c.seed.unwrap_or(seed),
            };
            if !grid.free_flow && grid.explicit.is_empty() && grid.random == 0 {
                issues.push("conditions: the condition grid is empty".into());
            }
            grid
        }
        None => {
            notes.push("conditions not set, using free flow only".into());
            ConditionGrid {
                free_flow: true,
                explicit: Vec::new(),
                random: 0,
                seed,
            }
        }
    };

    let p = raw.population;
    let mut classes = Vec::new();
    let mut total: i64 = 0;
    if p.classes.is_empty() {
        issues.push("population: at least one class is required".into());
    }
    for (i, c) in p.classes.into_iter().enumerate() {
        if c.count < 1 {
            issues.push(format!(
                "population.classes[{i}]: count = {} must be at least 1",
                c.count
            ));
        }
        total += c.count.max(0);
        for (what, link) in [("origin", &c.origin), ("destination", &c.destination)] {
            if !links.contains(link.as_str()) {
                issues.push(format!(
                    "population.classes[{i}]: unknown {what} link `{link}`"
                ));
            }
        }
        if !vehicle_ids.contains(c.vehicle.as_str()) {
            issues.push(format!(
                "population.classes[{i}]: unknown vehicle `{}`",
                c.vehicle
            ));
        }
        let preference = match (c.tradeoff, c.preferred_time) {
            (Some(v), None) => {
                if !(0.0..=1.0).contains(&v) {
                    issues.push(format!(
                        "population.classes[{i}]: tradeoff = {v} must lie in [0, 1]"
                    ));
                }
                Preference::Tradeoff(v)
            }
            (None, Some(t)) => {
                if !(t > 0.0 && t.is_finite()) {
                    issues.push(format!(
                        "population.classes[{i}]: preferred_time = {t} must be positive"
                    ));
                }
                Preference::PreferredTime(t)
            }
            _ => {
                issues.push(format!("population.classes[{i}]: exactly one of tradeoff and preferred_time is required"));
                Preference::Tradeoff(0.0)
            }
        };
        classes.push(PopulationClass {
            origin: c.origin,
            destination: c.destination,
            vehicle: c.vehicle,
            preference,
            count: c.count.max(0) as usize,
        });
    }
    match p.n {
        Some(n) if n < 1 => issues.push(format!("population.n = {n} must be at least 1")),
        Some(n) if n != total => issues.push(format!(
            "population.n = {n} but class counts sum to {total}"
        )),
        Some(_) => {}
        None => notes.push(format!(
            "population.n not set, using the class total {total}"
        )),
    }
    let grid = p.grid.unwrap_or(DEFAULT_GRID as i64);
    if grid < 2 {
        issues.push(format!("population.grid = {grid} must be at least 2"));
    }
    let refinements = p.refinements.unwrap_or(DEFAULT_REFINEMENTS as i64);
    if refinements < 0 {
        issues.push(format!(
            "population.refinements = {refinements} must be non-negative"
        ));
    }

    let budget = match raw.budget {
        Some(b) => {
            let min = b.min.unwrap_or(0.0);
            let steps = b.steps.unwrap_or(DEFAULT_BUDGET_STEPS as i64);
            if !(min >= 0.0 && min.is_finite()) {
                issues.push(format!("budget.min = {min} must be non-negative"));
            }
            if let Some(max) = b.max {
                if !(max >= min && max.is_finite()) {
                    issues.push(format!(
                        "budget.max = {max} must be finite and at least budget.min = {min}"
                    ));
                }
            } else {
                notes.push(format!("budget.max not set, using {AUTO_BUDGET_HEADROOM} x n x largest compliance threshold"));
            }
            if steps < 1 {
                issues.push(format!("budget.steps = {steps} must be at least 1"));
            }
            BudgetSweep {
                min,
                max: b.max,
                steps: steps.max(1) as usize,
            }
        }
        None => {
            notes.push(format!(
                "budget not set, sweeping {DEFAULT_BUDGET_STEPS} budgets from 0 to {AUTO_BUDGET_HEADROOM} x n x largest compliance threshold"
            ));
            BudgetSweep {
                min: 0.0,
                max: None,
                steps: DEFAULT_BUDGET_STEPS,
            }
        }
    };

    let noise = raw.noise.map(|n| {
        if !(n.relative_std >= 0.0 && n.relative_std.is_finite()) {
            issues.push(format!(
                "noise.relative_std = {} must be non-negative",
                n.relative_std
            ));
        }
        ExecutionNoise {
            relative_std: n.relative_std,
            seed: n.seed.unwrap_or(seed),
        }
    });

    let output_dir = raw.output.map(|o| o.dir).unwrap_or_else(|| {
        notes.push("output.dir not set, using `out`".into());
        PathBuf::from("out")
    });

    if !issues.is_empty() {
        return Err(HarnessError::Invalid(issues));
    }
    let config = ScenarioConfig {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        network,
        vehicles: raw.vehicles,
        sim: SimConfig {
            dt,
            horizon,
            stop_dwell,
            ..sim_defaults
        },
        routes: routes as usize,
        seed,
        epsilon_fraction,
        styles,
        conditions,
        population: PopulationSpec {
            classes,
            grid: grid as usize,
            refinements: refinements as usize,
        },
        budget,
        noise,
        output_dir,
    };
    Ok((config, notes))
}
