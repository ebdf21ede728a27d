//! Trade-off estimation from a reported preferred travel time.
//!
//! The reported time picks a point on the Pareto chain. A uniform grid over
//! ϑ is mapped to nominal outcomes and the grid value whose outcome is
//! closest to that point wins; the grid is then refined around the winner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FeasibleSet, OutcomePoint};
use crate::mechanism::{nominal_outcome, MechanismError, Theta};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrefsError {
    #[error("reported travel time {t} outside the achievable range [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("grid needs at least 2 points, got {0}")]
    InvalidGrid(usize),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate<T> {
    pub tradeoff: T,
    pub theta: Theta<T>,
    /// Point on the Pareto chain at the reported time.
    pub target: OutcomePoint<T>,
    /// Nominal outcome under the estimate.
    pub matched: OutcomePoint<T>,
    pub residual: T,
    /// Residual after the initial grid and after each refinement round.
    pub residual_history: Vec<T>,
    /// Grid spacing of the last round.
    pub cell: T,
}

pub const DEFAULT_GRID: usize = 101;
pub const DEFAULT_REFINEMENTS: usize = 2;

/// Point of the Pareto chain with travel time `t`, interpolated linearly.
pub fn pareto_point_for_time<T: Scalar>(
    feasible: &FeasibleSet<T>,
    t: T,
) -> Result<OutcomePoint<T>, PrefsError> {
    let chain = &feasible.pareto;
    let (lo, hi) = feasible.pareto_time_range();
    let tol = T::feasibility_tol() * hi.abs().max(T::one());
    if !(t >= lo - tol && t <= hi + tol) {
        return Err(PrefsError::OutOfRange {
            t: t.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        });
    }
    if chain.len() == 1 || t <= lo {
        return Ok(chain[0]);
    }
    if t >= hi {
        return Ok(*chain.last().unwrap());
    }
    let k = chain
        .windows(2)
        .position(|w| t <= w[1].travel_time)
        .unwrap();
    let (a, b) = (chain[k], chain[k + 1]);
    let s = (t - a.travel_time) / (b.travel_time - a.travel_time);
    Ok(OutcomePoint::new(
        t,
        a.emissions + s * (b.emissions - a.emissions),
    ))
}

struct Sample<T> {
    tradeoff: T,
    nominal: OutcomePoint<T>,
    distance: T,
}

fn evaluate_grid<T: Scalar>(
    feasible: &FeasibleSet<T>,
    target: &OutcomePoint<T>,
    lo: T,
    hi: T,
    s: usize,
) -> Result<Vec<Sample<T>>, PrefsError> {
    let last = T::from_usize(s - 1).unwrap();
    (0..s)
        .map(|j| {
            let tradeoff = if j == s - 1 {
                hi
            } else {
                lo + (hi - lo) * T::from_usize(j).unwrap() / last
            };
            let nominal = nominal_outcome(feasible, &Theta::from_tradeoff(tradeoff)?)?;
            Ok(Sample {
                tradeoff,
                nominal,
                distance: nominal.distance(target),
            })
        })
        .collect()
}

/// Grid index of the winner. An exact match takes the middle of the run of
/// matching grid points. Otherwise, among equally close points, the one
/// nearest to where the target time falls between grid outcomes is taken so
/// that refinement zooms in on the right place.
fn select<T: Scalar>(samples: &[Sample<T>], target: &OutcomePoint<T>, tol: T) -> usize {
    let best = samples
        .iter()
        .map(|s| s.distance)
        .fold(T::infinity(), T::min);
    let tied: Vec<usize> = (0..samples.len())
        .filter(|&j| samples[j].distance <= best + tol)
        .collect();
    if best <= tol {
        let first = tied[0];
        let run = tied
            .iter()
            .enumerate()
            .take_while(|&(k, &j)| j == first + k)
            .count();
        return first + (run - 1) / 2;
    }
    // Nominal travel time is nondecreasing in ϑ.
    let below = samples
        .iter()
        .rposition(|s| s.nominal.travel_time <= target.travel_time);
    let gap = |j: usize| match below {
        Some(k) if j <= k => k - j,
        Some(k) => j - (k + 1),
        None => j,
    };
    *tied.iter().min_by_key(|&&j| gap(j)).unwrap()
}

/// Estimates ϑ on an `s`-point grid over `[0, 1]` refined `refinements` times.
pub fn estimate_theta<T: Scalar>(
    feasible: &FeasibleSet<T>,
    t_report: T,
    s: usize,
    refinements: usize,
) -> Result<ThetaEstimate<T>, PrefsError> {
    if s < 2 {
        return Err(PrefsError::InvalidGrid(s));
    }
    let target = pareto_point_for_time(feasible, t_report)?;
    let tol =
        T::feasibility_tol() * (target.travel_time.abs() + target.emissions.abs()).max(T::one());

    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut incumbent: Option<(T, OutcomePoint<T>, T)> = None;
    let mut history = Vec::with_capacity(refinements + 1);
    let mut cell = T::one();
    for _ in 0..=refinements {
        let samples = evaluate_grid(feasible, &target, lo, hi, s)?;
        cell = (hi - lo) / T::from_usize(s - 1).unwrap();
        let j = select(&samples, &target, tol);
        let pick = &samples[j];
        let improves = incumbent
            .as_ref()
            .map_or(true, |&(_, _, d)| pick.distance < d);
        if improves {
            incumbent = Some((pick.tradeoff, pick.nominal, pick.distance));
        }
        history.push(incumbent.as_ref().unwrap().2);
        lo = samples[j.saturating_sub(1)].tradeoff;
        hi = samples[(j + 1).min(s - 1)].tradeoff;
    }
    let (tradeoff, matched, residual) = incumbent.unwrap();
    Ok(ThetaEstimate {
        tradeoff,
        theta: Theta::from_tradeoff(tradeoff)?,
        target,
        matched,
        residual,
        residual_history: history,
        cell,
    })
}
