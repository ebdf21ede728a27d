//! Per-class feasible sets and the participant population.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{Preference, ScenarioConfig};
use super::HarnessError;
use crate::geometry::{FeasibleSet, OutcomePoint};
use crate::mechanism::{Participant, Theta, UserProfile};
use crate::microsim::{generate_outcome_cloud, RouteCloud, SimError};
use crate::netgraph::Network;
use crate::prefs::estimate_theta;

/// Users with the same origin, destination and vehicle share one feasible set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassKey {
    pub origin: String,
    pub destination: String,
    pub vehicle: String,
}

impl fmt::Display for ClassKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} ({})",
            self.origin, self.destination, self.vehicle
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSamples {
    pub links: Vec<String>,
    pub points: Vec<OutcomePoint<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFeasibility {
    pub key: ClassKey,
    pub routes: Vec<RouteSamples>,
    pub feasible: FeasibleSet<f64>,
    /// Route holding the lowest-emission sample.
    pub eco_route: usize,
    /// Fastest sample on the eco route: the baseline recommendation.
    pub eco_point: OutcomePoint<f64>,
}

/// Serialized form of the feasible sets of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSetCache {
    pub scenario: String,
    pub classes: Vec<ClassFeasibility>,
}

pub fn class_feasibility(
    key: ClassKey,
    net: &Network,
    clouds: Vec<RouteCloud>,
) -> Result<ClassFeasibility, HarnessError> {
    let routes: Vec<RouteSamples> = clouds
        .into_iter()
        .map(|c| RouteSamples {
            links: c
                .route
                .link_ids(net)
                .into_iter()
                .map(str::to_string)
                .collect(),
            points: c.points,
        })
        .collect();
    let all: Vec<OutcomePoint<f64>> = routes
        .iter()
        .flat_map(|r| r.points.iter().copied())
        .collect();
    let feasible = FeasibleSet::from_points(&all).map_err(|source| HarnessError::Geometry {
        class: key.to_string(),
        source,
    })?;

    let mut eco_route = 0;
    let mut lowest = f64::INFINITY;
    for (i, r) in routes.iter().enumerate() {
        for p in &r.points {
            if p.emissions < lowest {
                lowest = p.emissions;
                eco_route = i;
            }
        }
    }
    let eco_point = routes[eco_route]
        .points
        .iter()
        .copied()
        .min_by(|a, b| {
            a.travel_time
                .total_cmp(&b.travel_time)
                .then(a.emissions.total_cmp(&b.emissions))
        })
        .expect("nonempty route cloud");
    Ok(ClassFeasibility {
        key,
        routes,
        feasible,
        eco_route,
        eco_point,
    })
}

fn class_keys(config: &ScenarioConfig) -> Vec<ClassKey> {
    let mut keys: Vec<ClassKey> = Vec::new();
    for c in &config.population.classes {
        let key = ClassKey {
            origin: c.origin.clone(),
            destination: c.destination.clone(),
            vehicle: c.vehicle.clone(),
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

/// Simulates the outcome cloud of every class in the scenario, in order of
/// first appearance.
pub fn compute_feasible_sets(
    config: &ScenarioConfig,
) -> Result<Vec<ClassFeasibility>, HarnessError> {
    let net = Network::build(&config.network)
        .map_err(|e| HarnessError::Invalid(vec![format!("network: {e}")]))?;
    let conditions = config.traffic_conditions();
    class_keys(config)
        .into_iter()
        .map(|key| {
            let vehicle = config
                .vehicle(&key.vehicle)
                .expect("validated vehicle reference");
            let clouds = generate_outcome_cloud(
                &net,
                &key.origin,
                &key.destination,
                vehicle,
                config.routes,
                &config.styles,
                &conditions,
                &config.sim,
            )
            .map_err(|source| HarnessError::Simulation {
                class: key.to_string(),
                source,
            })?;
            if clouds.is_empty() {
                let source = SimError::Network(crate::netgraph::NetworkError::InvalidRoute);
                return Err(HarnessError::Simulation {
                    class: key.to_string(),
                    source,
                });
            }
            class_feasibility(key, &net, clouds)
        })
        .collect()
}

pub fn write_feasible_sets(
    path: &Path,
    scenario: &str,
    classes: &[ClassFeasibility],
) -> Result<(), HarnessError> {
    let cache = FeasibleSetCache {
        scenario: scenario.to_string(),
        classes: classes.to_vec(),
    };
    let text =
        serde_json::to_string_pretty(&cache).map_err(|e| HarnessError::Cache(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

/// Loads cached feasible sets and checks they cover every class of `config`.
pub fn read_feasible_sets(
    path: &Path,
    config: &ScenarioConfig,
) -> Result<Vec<ClassFeasibility>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let cache: FeasibleSetCache = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Cache(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for key in class_keys(config) {
        let class = cache.classes.iter().find(|c| c.key == key).ok_or_else(|| {
            HarnessError::Cache(format!("{} has no entry for class {key}", path.display()))
        })?;
        out.push(class.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub profiles: Vec<UserProfile<f64>>,
    pub participants: Vec<Participant<f64>>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    /// Per-user `θ·(x_eco − x_nom)`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.participants
            .iter()
            .map(|p| p.compliance_threshold().unwrap_or(0.0))
            .collect()
    }
}

/// Expands the population classes into participants. Users reporting a
/// preferred time get an estimated trade-off.
pub fn build_population(
    config: &ScenarioConfig,
    classes: &[ClassFeasibility],
) -> Result<Population, HarnessError> {
    let n = config.population.size();
    let width = n.to_string().len();
    let mut profiles = Vec::with_capacity(n);
    let mut participants = Vec::with_capacity(n);
    for spec in &config.population.classes {
        let class = classes
            .iter()
            .find(|c| {
                c.key.origin == spec.origin
                    && c.key.destination == spec.destination
                    && c.key.vehicle == spec.vehicle
            })
            .ok_or_else(|| {
                HarnessError::Cache(format!(
                    "no feasible set for {} -> {} ({})",
                    spec.origin, spec.destination, spec.vehicle
                ))
            })?;
        let feasible = Arc::new(class.feasible.clone());
        let first_id = format!("u{:0width$}", profiles.len() + 1);
        let tradeoff = match spec.preference {
            Preference::Tradeoff(v) => v,
            Preference::PreferredTime(t) => {
                estimate_theta(
                    &feasible,
                    t,
                    config.population.grid,
                    config.population.refinements,
                )
                .map_err(|source| HarnessError::Preference {
                    user: first_id.clone(),
                    source,
                })?
                .tradeoff
            }
        };
        let theta = Theta::from_tradeoff(tradeoff).map_err(|source| HarnessError::Participant {
            user: first_id.clone(),
            source,
        })?;
        let template = Participant::new(first_id.clone(), theta, feasible, Some(class.eco_point))
            .map_err(|source| HarnessError::Participant {
            user: first_id,
            source,
        })?;
        for _ in 0..spec.count {
            let id = format!("u{:0width$}", profiles.len() + 1);
            profiles.push(UserProfile {
                id: id.clone(),
                origin: spec.origin.clone(),
                destination: spec.destination.clone(),
                vehicle: spec.vehicle.clone(),
                tradeoff,
            });
            participants.push(Participant {
                id,
                ..template.clone()
            });
        }
    }
    Ok(Population {
        profiles,
        participants,
    })
}
