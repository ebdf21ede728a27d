//! Budget sweeps over both mechanisms.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExecutionNoise, ScenarioConfig, AUTO_BUDGET_HEADROOM};
use super::population::{build_population, compute_feasible_sets, ClassFeasibility, Population};
use super::HarnessError;
use crate::geometry::OutcomePoint;
use crate::mechanism::{
    baseline_incentives, default_epsilon, optimal_incentives, settle, MechanismKind,
    MechanismResult, Participant,
};

/// One line of the sweep table. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: f64,
    pub mechanism: MechanismKind,
    pub compliance_ratio: f64,
    pub total_emissions_g: f64,
    pub mean_travel_time_s: f64,
    pub norm_emissions: f64,
    pub norm_travel_time: f64,
    pub realized_spend: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub result: MechanismResult<f64>,
    /// Whether each user's payment covers the eco-route threshold.
    pub threshold_met: Vec<bool>,
    /// Realized outcome per user after execution noise.
    pub actual: Vec<OutcomePoint<f64>>,
    pub payouts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub budgets: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub population: Population,
    /// Sorted by (budget, mechanism).
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points.iter().map(|p| p.row.clone()).collect()
    }

    pub fn series(&self, mechanism: MechanismKind) -> impl Iterator<Item = &SweepPoint> {
        self.points
            .iter()
            .filter(move |p| p.row.mechanism == mechanism)
    }
}

/// Sweep budgets: the configured grid, with the automatic maximum derived
/// from the largest compliance threshold.
pub fn resolve_budgets(config: &ScenarioConfig, thresholds: &[f64]) -> Vec<f64> {
    let max = config.budget.max.unwrap_or_else(|| {
        let top = thresholds.iter().copied().fold(0.0, f64::max);
        let auto = AUTO_BUDGET_HEADROOM * thresholds.len() as f64 * top;
        if auto > config.budget.min {
            auto
        } else {
            config.budget.min + 1.0
        }
    });
    config.budget.budgets(max)
}

/// Simulates the scenario's feasible sets and runs the full sweep.
pub fn run_budget_sweep(config: &ScenarioConfig) -> Result<SweepReport, HarnessError> {
    let classes = compute_feasible_sets(config)?;
    run_budget_sweep_with(config, &classes)
}

/// Sweep over precomputed feasible sets.
pub fn run_budget_sweep_with(
    config: &ScenarioConfig,
    classes: &[ClassFeasibility],
) -> Result<SweepReport, HarnessError> {
    let population = build_population(config, classes)?;
    let thresholds = population.thresholds();
    let budgets = resolve_budgets(config, &thresholds);
    sweep_budgets(population, &budgets, config.epsilon_fraction, config.noise)
}

fn threshold_tol(threshold: f64) -> f64 {
    1e-9 * threshold.abs().max(1.0)
}

fn realize(
    participants: &[Participant<f64>],
    result: &MechanismResult<f64>,
    thresholds: &[f64],
    epsilon_fraction: f64,
    noise: Option<(ExecutionNoise, u64)>,
) -> SweepPoint {
    let threshold_met: Vec<bool> = match result.mechanism {
        MechanismKind::Baseline => result.compliant.clone(),
        MechanismKind::Optimal => result
            .offers
            .iter()
            .zip(thresholds)
            .map(|(o, &t)| o.payment >= t - threshold_tol(t))
            .collect(),
    };

    let mut rng = noise.map(|(n, stream)| {
        (
            Normal::new(0.0, n.relative_std).unwrap(),
            ChaCha8Rng::seed_from_u64(n.seed ^ stream),
        )
    });
    let actual: Vec<OutcomePoint<f64>> = result
        .outcomes
        .iter()
        .map(|x| match rng.as_mut() {
            Some((dist, rng)) => {
                let ft: f64 = dist.sample(rng);
                let fe: f64 = dist.sample(rng);
                OutcomePoint::new(
                    x.travel_time * (1.0 + ft).max(1e-3),
                    x.emissions * (1.0 + fe).max(1e-3),
                )
            }
            None => *x,
        })
        .collect();
    let payouts: Vec<f64> = result
        .offers
        .iter()
        .zip(&result.compliant)
        .zip(&actual)
        .map(|((offer, &c), x)| {
            if c {
                settle(
                    offer,
                    x,
                    default_epsilon(&offer.recommended, epsilon_fraction),
                )
            } else {
                0.0
            }
        })
        .collect();

    let n = participants.len() as f64;
    let complied = threshold_met.iter().filter(|&&c| c).count() as f64;
    let row = SweepRow {
        budget: result.budget,
        mechanism: result.mechanism,
        compliance_ratio: complied / n,
        total_emissions_g: actual.iter().map(|x| x.emissions).sum(),
        mean_travel_time_s: actual.iter().map(|x| x.travel_time).sum::<f64>() / n,
        norm_emissions: f64::NAN,
        norm_travel_time: f64::NAN,
        realized_spend: payouts.iter().sum(),
    };
    SweepPoint {
        row,
        result: result.clone(),
        threshold_met,
        actual,
        payouts,
    }
}

/// Runs both mechanisms at every budget. Grid points are evaluated in
/// parallel; output order is (budget, mechanism) regardless.
pub fn sweep_budgets(
    population: Population,
    budgets: &[f64],
    epsilon_fraction: f64,
    noise: Option<ExecutionNoise>,
) -> Result<SweepReport, HarnessError> {
    let participants = &population.participants;
    if participants.is_empty() {
        return Err(HarnessError::Invalid(vec!["population is empty".into()]));
    }
    let thresholds = population.thresholds();
    let mechanisms = [MechanismKind::Baseline, MechanismKind::Optimal];
    let jobs: Vec<(usize, MechanismKind)> = (0..budgets.len())
        .flat_map(|i| mechanisms.iter().map(move |&m| (i, m)))
        .collect();
    let mut points = jobs
        .par_iter()
        .map(|&(i, mechanism)| {
            let budget = budgets[i];
            let result = match mechanism {
                MechanismKind::Baseline => baseline_incentives(participants, budget),
                MechanismKind::Optimal => optimal_incentives(participants, budget),
            }
            .map_err(|source| HarnessError::Mechanism {
                budget,
                mechanism,
                source,
            })?;
            let stream = (i as u64) << 1 | (mechanism == MechanismKind::Optimal) as u64;
            Ok(realize(
                participants,
                &result,
                &thresholds,
                epsilon_fraction,
                noise.map(|n| (n, stream)),
            ))
        })
        .collect::<Result<Vec<SweepPoint>, HarnessError>>()?;
    points.sort_by(|a, b| {
        a.row
            .budget
            .total_cmp(&b.row.budget)
            .then(a.row.mechanism.cmp(&b.row.mechanism))
    });

    for m in mechanisms {
        let base = points
            .iter()
            .filter(|p| p.row.mechanism == m)
            .map(|p| (p.row.total_emissions_g, p.row.mean_travel_time_s))
            .next();
        if let Some((e0, t0)) = base {
            for p in points.iter_mut().filter(|p| p.row.mechanism == m) {
                p.row.norm_emissions = p.row.total_emissions_g / e0;
                p.row.norm_travel_time = p.row.mean_travel_time_s / t0;
            }
        }
    }
    Ok(SweepReport {
        budgets: budgets.to_vec(),
        thresholds,
        population,
        points,
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyTable);
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.to_string()))
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_sweep_csv(rows, std::io::BufWriter::new(file))
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .map_err(|e| HarnessError::Csv(e.to_string()))
}
