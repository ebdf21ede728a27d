//! Incentive mechanisms: nominal outcomes, the budget-constrained optimal
//! program, the equal-split baseline, compliance and settlement.
//!
//! A user's cost is `θ·x` with `θ = [1 − ϑ, ϑ]` over `[travel time,
//! emissions]`. The optimal mechanism picks recommendations `x_rec` for all
//! users at once, minimizing total emissions subject to
//! `Σ θ_i·x_rec_i ≤ B + Σ θ_i·x_nom_i` and `x_rec_i ∈ X_i`, then pays each
//! user exactly the cost increase `γ_i = θ_i·(x_rec_i − x_nom_i)`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{within_epsilon, FeasibleSet, OutcomePoint};
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("trade-off {0} outside [0, 1]")]
    InvalidTradeoff(f64),
    #[error("budget {0} is negative or not finite")]
    InvalidBudget(f64),
    #[error("mechanism needs at least one user")]
    NoUsers,
    #[error("user `{0}` has no eco-route recommendation")]
    MissingEcoPoint(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Preference vector `[1 − ϑ, ϑ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta<T> {
    pub weights: [T; 2],
}

impl<T: Scalar> Theta<T> {
    pub fn from_tradeoff(tradeoff: T) -> Result<Self, MechanismError> {
        if !(tradeoff >= T::zero() && tradeoff <= T::one()) {
            return Err(MechanismError::InvalidTradeoff(tradeoff.to_f64_lossy()));
        }
        Ok(Self {
            weights: [T::one() - tradeoff, tradeoff],
        })
    }

    /// The weight on emissions.
    pub fn tradeoff(&self) -> T {
        self.weights[1]
    }

    pub fn cost(&self, x: &OutcomePoint<T>) -> T {
        x.dot(self.weights)
    }
}

/// A user's report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile<T> {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub vehicle: String,
    pub tradeoff: T,
}

impl<T: Scalar> UserProfile<T> {
    pub fn theta(&self) -> Result<Theta<T>, MechanismError> {
        Theta::from_tradeoff(self.tradeoff)
    }
}

/// A user as seen by the mechanisms: preferences, feasible set, nominal
/// outcome and (for the baseline) the eco-route recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant<T> {
    pub id: String,
    pub theta: Theta<T>,
    pub feasible: Arc<FeasibleSet<T>>,
    pub nominal: OutcomePoint<T>,
    pub eco_point: Option<OutcomePoint<T>>,
}

impl<T: Scalar> Participant<T> {
    /// Computes the nominal outcome from `theta`.
    pub fn new(
        id: impl Into<String>,
        theta: Theta<T>,
        feasible: Arc<FeasibleSet<T>>,
        eco_point: Option<OutcomePoint<T>>,
    ) -> Result<Self, MechanismError> {
        let nominal = nominal_outcome(&feasible, &theta)?;
        Ok(Self {
            id: id.into(),
            theta,
            feasible,
            nominal,
            eco_point,
        })
    }

    /// `θ·(x_eco − x_nom)`: the smallest payment that makes the eco-route
    /// recommendation acceptable.
    pub fn compliance_threshold(&self) -> Option<T> {
        self.eco_point
            .map(|p| incentive_gap(&self.theta, &p, &self.nominal))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Baseline,
    Optimal,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Baseline => "baseline",
            MechanismKind::Optimal => "optimal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveOffer<T> {
    pub user_id: String,
    pub recommended: OutcomePoint<T>,
    pub payment: T,
    pub mechanism: MechanismKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismResult<T> {
    pub mechanism: MechanismKind,
    pub budget: T,
    pub offers: Vec<IncentiveOffer<T>>,
    /// Predicted compliance per offer.
    pub compliant: Vec<bool>,
    /// Predicted outcome per user: `x_rec` if compliant, else `x_nom`.
    pub outcomes: Vec<OutcomePoint<T>>,
    /// Payments to compliant users.
    pub total_spend: T,
    pub total_emissions: T,
    pub mean_travel_time: T,
}

impl<T: Scalar> MechanismResult<T> {
    fn assemble(
        mechanism: MechanismKind,
        budget: T,
        offers: Vec<IncentiveOffer<T>>,
        participants: &[Participant<T>],
    ) -> Self {
        let compliant: Vec<bool> = offers
            .iter()
            .zip(participants)
            .map(|(o, u)| predict_compliance(o, u))
            .collect();
        let outcomes: Vec<OutcomePoint<T>> = offers
            .iter()
            .zip(participants)
            .zip(&compliant)
            .map(|((o, u), &c)| if c { o.recommended } else { u.nominal })
            .collect();
        let total_spend = offers
            .iter()
            .zip(&compliant)
            .filter(|(_, &c)| c)
            .map(|(o, _)| o.payment)
            .sum();
        let total_emissions = outcomes.iter().map(|x| x.emissions).sum();
        let n = T::from_usize(outcomes.len()).unwrap();
        let mean_travel_time = outcomes.iter().map(|x| x.travel_time).sum::<T>() / n;
        Self {
            mechanism,
            budget,
            offers,
            compliant,
            outcomes,
            total_spend,
            total_emissions,
            mean_travel_time,
        }
    }

    pub fn compliance_ratio(&self) -> f64 {
        let c = self.compliant.iter().filter(|&&c| c).count();
        c as f64 / self.compliant.len() as f64
    }

    /// One row per user: `id,theta,x_nom_t,x_nom_e,x_rec_t,x_rec_e,gamma,compliant`.
    pub fn write_csv<W: Write>(
        &self,
        participants: &[Participant<T>],
        out: W,
    ) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id",
            "theta",
            "x_nom_t",
            "x_nom_e",
            "x_rec_t",
            "x_rec_e",
            "gamma",
            "compliant",
        ])?;
        for ((offer, user), c) in self.offers.iter().zip(participants).zip(&self.compliant) {
            w.write_record([
                offer.user_id.clone(),
                user.theta.tradeoff().to_string(),
                user.nominal.travel_time.to_string(),
                user.nominal.emissions.to_string(),
                offer.recommended.travel_time.to_string(),
                offer.recommended.emissions.to_string(),
                offer.payment.to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn incentive_gap<T: Scalar>(
    theta: &Theta<T>,
    x_rec: &OutcomePoint<T>,
    x_nom: &OutcomePoint<T>,
) -> T {
    theta.weights[0] * (x_rec.travel_time - x_nom.travel_time)
        + theta.weights[1] * (x_rec.emissions - x_nom.emissions)
}

fn optimal_point<T: Scalar>(lp: &LinearProgram<T>) -> Result<(Vec<T>, T), MechanismError> {
    let sol = solve_lp(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.x, sol.objective)),
        s => Err(MechanismError::Internal(format!(
            "program over a bounded nonempty set reported {s:?}"
        ))),
    }
}

/// Minimizer of `θ·x` over `X`.
///
/// When `θ` puts zero weight on a coordinate the minimizer set can be a whole
/// edge; the other coordinate is then minimized over it so the result is
/// Pareto optimal.
pub fn nominal_outcome<T: Scalar>(
    feasible: &FeasibleSet<T>,
    theta: &Theta<T>,
) -> Result<OutcomePoint<T>, MechanismError> {
    let (normals, offsets) = feasible.matrix_form();
    let rows: Vec<Vec<T>> = normals.iter().map(|n| n.to_vec()).collect();
    let lp = LinearProgram::new(theta.weights.to_vec(), rows.clone(), offsets.clone())?;
    let (x, value) = optimal_point(&lp)?;
    let point = OutcomePoint::new(x[0], x[1]);
    let zero_axis = theta.weights.iter().position(|w| *w == T::zero());
    let Some(axis) = zero_axis else {
        return Ok(point);
    };

    let mut objective = vec![T::zero(); 2];
    objective[1 - axis] = T::one();
    let mut rows = rows;
    let mut offsets = offsets;
    rows.push(theta.weights.to_vec());
    offsets.push(value + T::feasibility_tol() * value.abs().max(T::one()));
    let refined = LinearProgram::new(objective, rows, offsets)?;
    let (x, _) = optimal_point(&refined)?;
    Ok(OutcomePoint::new(x[0], x[1]))
}

/// `γ = max(0, θ·(x_rec − x_nom))`.
pub fn incentive_amount<T: Scalar>(
    theta: &Theta<T>,
    x_rec: &OutcomePoint<T>,
    x_nom: &OutcomePoint<T>,
) -> T {
    incentive_gap(theta, x_rec, x_nom).max(T::zero())
}

/// The planner's program over `x_rec ∈ ℝ^{2n}`: minimize total emissions
/// subject to one budget row followed by each user's halfspace block.
pub fn assemble_program<T: Scalar>(
    participants: &[Participant<T>],
    budget: T,
) -> Result<LinearProgram<T>, MechanismError> {
    let n = participants.len();
    if n == 0 {
        return Err(MechanismError::NoUsers);
    }
    let objective: Vec<T> = (0..n).flat_map(|_| [T::zero(), T::one()]).collect();

    let mut budget_row = Vec::with_capacity(2 * n);
    let mut budget_rhs = budget;
    for u in participants {
        budget_row.extend_from_slice(&u.theta.weights);
        budget_rhs = budget_rhs + u.theta.cost(&u.nominal);
    }
    let mut rows = vec![budget_row];
    let mut rhs = vec![budget_rhs];
    for (i, u) in participants.iter().enumerate() {
        for h in &u.feasible.halfspaces {
            let mut row = vec![T::zero(); 2 * n];
            row[2 * i] = h.normal[0];
            row[2 * i + 1] = h.normal[1];
            rows.push(row);
            rhs.push(h.offset);
        }
    }
    Ok(LinearProgram::new(objective, rows, rhs)?)
}

fn check_budget<T: Scalar>(budget: T) -> Result<(), MechanismError> {
    if budget >= T::zero() && budget.is_finite() {
        Ok(())
    } else {
        Err(MechanismError::InvalidBudget(budget.to_f64_lossy()))
    }
}

/// Emission-minimizing recommendations and payments under budget `B`.
pub fn optimal_incentives<T: Scalar>(
    participants: &[Participant<T>],
    budget: T,
) -> Result<MechanismResult<T>, MechanismError> {
    check_budget(budget)?;
    let lp = assemble_program(participants, budget)?;
    let (x, _) = optimal_point(&lp)?;
    let offers = participants
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let recommended = OutcomePoint::new(x[2 * i], x[2 * i + 1]);
            IncentiveOffer {
                user_id: u.id.clone(),
                recommended,
                payment: incentive_amount(&u.theta, &recommended, &u.nominal),
                mechanism: MechanismKind::Optimal,
            }
        })
        .collect();
    Ok(MechanismResult::assemble(
        MechanismKind::Optimal,
        budget,
        offers,
        participants,
    ))
}

/// Equal split `B/n`, each user recommended the eco-route point.
pub fn baseline_incentives<T: Scalar>(
    participants: &[Participant<T>],
    budget: T,
) -> Result<MechanismResult<T>, MechanismError> {
    check_budget(budget)?;
    if participants.is_empty() {
        return Err(MechanismError::NoUsers);
    }
    let share = budget / T::from_usize(participants.len()).unwrap();
    let offers = participants
        .iter()
        .map(|u| {
            let recommended = u
                .eco_point
                .ok_or_else(|| MechanismError::MissingEcoPoint(u.id.clone()))?;
            Ok(IncentiveOffer {
                user_id: u.id.clone(),
                recommended,
                payment: share,
                mechanism: MechanismKind::Baseline,
            })
        })
        .collect::<Result<Vec<_>, MechanismError>>()?;
    Ok(MechanismResult::assemble(
        MechanismKind::Baseline,
        budget,
        offers,
        participants,
    ))
}

/// Rational acceptance: `γ ≥ θ·(x_rec − x_nom) − tol`.
pub fn predict_compliance<T: Scalar>(offer: &IncentiveOffer<T>, user: &Participant<T>) -> bool {
    offer.payment
        >= incentive_gap(&user.theta, &offer.recommended, &user.nominal) - T::feasibility_tol()
}

/// Payout after the trip: `γ` if the realized outcome is within the closed
/// `ε`-ball around the recommendation, else zero.
pub fn settle<T: Scalar>(offer: &IncentiveOffer<T>, actual: &OutcomePoint<T>, epsilon: T) -> T {
    if within_epsilon(actual, &offer.recommended, epsilon) {
        offer.payment
    } else {
        T::zero()
    }
}

/// Settlement radius as a fraction of `|x_rec|`.
pub fn default_epsilon<T: Scalar>(recommended: &OutcomePoint<T>, fraction: T) -> T {
    fraction * recommended.distance(&OutcomePoint::new(T::zero(), T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::on_pareto_chain;
    use proptest::prelude::*;

    fn pt(t: f64, e: f64) -> OutcomePoint<f64> {
        OutcomePoint::new(t, e)
    }

    fn set(points: &[(f64, f64)]) -> Arc<FeasibleSet<f64>> {
        let pts: Vec<_> = points.iter().map(|&(t, e)| pt(t, e)).collect();
        Arc::new(FeasibleSet::from_points(&pts).unwrap())
    }

    fn user(
        id: &str,
        tradeoff: f64,
        x: &Arc<FeasibleSet<f64>>,
        eco: Option<OutcomePoint<f64>>,
    ) -> Participant<f64> {
        Participant::new(id, Theta::from_tradeoff(tradeoff).unwrap(), x.clone(), eco).unwrap()
    }

    fn close(a: OutcomePoint<f64>, b: OutcomePoint<f64>) -> bool {
        a.distance(&b) <= 1e-9
    }

    #[test]
    fn nominal_examples() {
        let x = set(&[(10.0, 5.0), (12.0, 3.0)]);
        let theta = Theta::from_tradeoff(0.3).unwrap();
        assert_eq!(theta.weights, [0.7, 0.3]);
        assert!(close(nominal_outcome(&x, &theta).unwrap(), pt(10.0, 5.0)));

        // Flat edges at both extremes: zero weights must still land on the chain.
        let sq = set(&[(1.0, 1.0), (2.0, 1.0), (2.0, 2.0), (1.0, 2.0), (1.5, 0.5)]);
        let t0 = nominal_outcome(&sq, &Theta::from_tradeoff(0.0).unwrap()).unwrap();
        assert!(close(t0, pt(1.0, 1.0)), "{t0:?}");
        let t1 = nominal_outcome(&sq, &Theta::from_tradeoff(1.0).unwrap()).unwrap();
        assert!(close(t1, pt(1.5, 0.5)), "{t1:?}");

        let chain = set(&[(1.0, 3.0), (2.0, 1.0), (3.0, 0.5), (4.0, 2.0)]);
        assert!(close(
            nominal_outcome(&chain, &Theta::from_tradeoff(0.0).unwrap()).unwrap(),
            pt(1.0, 3.0)
        ));
        assert!(close(
            nominal_outcome(&chain, &Theta::from_tradeoff(1.0).unwrap()).unwrap(),
            pt(3.0, 0.5)
        ));
        assert!(Theta::from_tradeoff(1.2).is_err());
    }

    #[test]
    fn incentive_examples() {
        let theta = Theta::from_tradeoff(0.3).unwrap();
        let (nom, rec) = (pt(10.0, 5.0), pt(12.0, 3.0));
        assert_eq!(incentive_amount(&theta, &nom, &nom), 0.0);
        assert!((incentive_amount(&theta, &rec, &nom) - 0.8).abs() < 1e-12);
        let pure = Theta::from_tradeoff(1.0).unwrap();
        assert_eq!(incentive_amount(&pure, &pt(10.0, 5.0), &pt(12.0, 3.0)), 2.0);
    }

    #[test]
    fn program_layout() {
        let tri = set(&[(1.0, 3.0), (2.0, 1.0), (3.0, 0.5)]);
        let u = user("a", 0.5, &tri, None);
        let lp = assemble_program(std::slice::from_ref(&u), 0.0).unwrap();
        assert_eq!((lp.num_vars(), lp.num_rows()), (2, 4));
        assert_eq!(lp.objective(), &[0.0, 1.0]);
        assert_eq!(lp.row(0), &[0.5, 0.5]);
        assert!((lp.rhs()[0] - u.theta.cost(&u.nominal)).abs() < 1e-12);

        let pair = [u.clone(), user("b", 0.5, &tri, None)];
        let lp = assemble_program(&pair, 1.0).unwrap();
        assert_eq!((lp.num_vars(), lp.num_rows()), (4, 7));
        assert_eq!(lp.row(0), &[0.5, 0.5, 0.5, 0.5]);
        for k in 0..3 {
            assert_eq!(&lp.row(1 + k)[..2], &lp.row(4 + k)[2..]);
            assert_eq!(&lp.row(1 + k)[2..], &[0.0, 0.0]);
        }
        assert_eq!(
            assemble_program::<f64>(&[], 1.0),
            Err(MechanismError::NoUsers)
        );
    }

    #[test]
    fn single_user_closed_forms() {
        let x = set(&[(10.0, 5.0), (12.0, 3.0)]);
        let u = [user("u", 0.3, &x, None)];
        let cases = [
            (0.0, pt(10.0, 5.0), 0.0),
            (0.5, pt(11.25, 3.75), 0.5),
            (0.8, pt(12.0, 3.0), 0.8),
            (1.0, pt(12.0, 3.0), 0.8),
        ];
        for (b, rec, gamma) in cases {
            let r = optimal_incentives(&u, b).unwrap();
            assert!(
                close(r.offers[0].recommended, rec),
                "B={b}: {:?}",
                r.offers[0]
            );
            assert!((r.offers[0].payment - gamma).abs() <= 1e-9, "B={b}");
            assert!((r.total_emissions - rec.emissions).abs() <= 1e-9);
            assert!(r.compliant[0]);
        }
    }

    #[test]
    fn baseline_thresholds() {
        // thresholds 0.8 and 2.0 on the same set
        let x = set(&[(10.0, 5.0), (12.0, 3.0), (14.0, 1.0)]);
        let a = user("a", 0.3, &x, Some(pt(12.0, 3.0)));
        let b = user("b", 0.0, &x, Some(pt(12.0, 3.0)));
        assert!((a.compliance_threshold().unwrap() - 0.8).abs() < 1e-12);
        assert!((b.compliance_threshold().unwrap() - 2.0).abs() < 1e-12);
        let users = [a, b];
        let r = baseline_incentives(&users, 2.0).unwrap();
        assert_eq!(r.compliant, vec![true, false]);
        assert_eq!(r.compliance_ratio(), 0.5);
        assert_eq!(r.total_spend, 1.0);
        assert!(close(r.outcomes[1], users[1].nominal));
        assert_eq!(
            baseline_incentives(&users, 0.0).unwrap().compliance_ratio(),
            0.0
        );
        assert_eq!(
            baseline_incentives(&users, 4.0).unwrap().compliance_ratio(),
            1.0
        );

        let no_eco = [user("c", 0.3, &x, None)];
        assert_eq!(
            baseline_incentives(&no_eco, 1.0),
            Err(MechanismError::MissingEcoPoint("c".into()))
        );
        assert!(matches!(
            optimal_incentives(&users, -1.0),
            Err(MechanismError::InvalidBudget(_))
        ));
    }

    #[test]
    fn compliance_and_settlement() {
        let x = set(&[(10.0, 5.0), (12.0, 3.0)]);
        let u = user("u", 0.3, &x, None);
        let offer = |payment| IncentiveOffer {
            user_id: "u".into(),
            recommended: pt(12.0, 3.0),
            payment,
            mechanism: MechanismKind::Optimal,
        };
        assert!(predict_compliance(&offer(0.8), &u));
        assert!(!predict_compliance(&offer(0.7), &u));
        let o = offer(0.8);
        assert_eq!(settle(&o, &pt(12.0, 3.0), 0.0), 0.8);
        assert_eq!(settle(&o, &pt(15.0, 7.0), 4.9), 0.0);
        assert_eq!(settle(&o, &pt(15.0, 7.0), 5.0), 0.8);
        assert!((default_epsilon(&pt(3.0, 4.0), 0.02) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn offers_csv() {
        let x = set(&[(10.0, 5.0), (12.0, 3.0)]);
        let users = [user("u1", 0.3, &x, None)];
        let r = optimal_incentives(&users, 1.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&users, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("id,theta,x_nom_t,x_nom_e,x_rec_t,x_rec_e,gamma,compliant")
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!((fields[0], fields[7]), ("u1", "true"));
        let nums: Vec<f64> = fields[1..7].iter().map(|f| f.parse().unwrap()).collect();
        for (got, want) in nums.iter().zip([0.3, 10.0, 5.0, 12.0, 3.0, 0.8]) {
            assert!((got - want).abs() < 1e-9, "{fields:?}");
        }
    }

    #[test]
    fn works_in_f32() {
        let pts = [
            OutcomePoint::new(10.0f32, 5.0),
            OutcomePoint::new(12.0, 3.0),
        ];
        let x = Arc::new(FeasibleSet::from_points(&pts).unwrap());
        let u = [Participant::new("u", Theta::from_tradeoff(0.3f32).unwrap(), x, None).unwrap()];
        let r = optimal_incentives(&u, 0.5f32).unwrap();
        assert!((r.total_emissions - 3.75).abs() < 1e-3);
    }

    fn arb_set() -> impl Strategy<Value = Arc<FeasibleSet<f64>>> {
        prop::collection::vec((1.0f64..100.0, 1.0f64..100.0), 1..15).prop_map(|raw| set(&raw))
    }

    fn arb_population() -> impl Strategy<Value = Vec<Participant<f64>>> {
        prop::collection::vec((arb_set(), 0.0f64..=1.0), 1..5).prop_map(|users| {
            users
                .iter()
                .enumerate()
                .map(|(i, (x, v))| user(&format!("u{i}"), *v, x, None))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn nominal_on_pareto_chain(x in arb_set(), v in 0.0f64..=1.0) {
            let nom = nominal_outcome(&x, &Theta::from_tradeoff(v).unwrap()).unwrap();
            prop_assert!(on_pareto_chain(&x, &nom, 1e-9), "{nom:?} vs {:?}", x.pareto);
        }

        #[test]
        fn budget_and_membership(users in arb_population(), b in 0.0f64..50.0) {
            let r = optimal_incentives(&users, b).unwrap();
            let spend: f64 = r.offers.iter().map(|o| o.payment).sum();
            prop_assert!(spend <= b + 1e-9);
            for (o, u) in r.offers.iter().zip(&users) {
                prop_assert!(o.payment >= 0.0);
                prop_assert!(u.feasible.contains(&o.recommended, 1e-9));
                // substitution: the participation constraint is tight
                let slack = u.theta.cost(&o.recommended) - o.payment - u.theta.cost(&u.nominal);
                prop_assert!(slack.abs() <= 1e-9);
            }
            prop_assert!(r.compliant.iter().all(|&c| c));
        }

        #[test]
        fn emissions_nonincreasing_in_budget(users in arb_population(), b in 0.0f64..30.0, db in 0.0f64..30.0) {
            let lo = optimal_incentives(&users, b).unwrap();
            let hi = optimal_incentives(&users, b + db).unwrap();
            prop_assert!(hi.total_emissions <= lo.total_emissions + 1e-9);
            let nominal: f64 = users.iter().map(|u| u.nominal.emissions).sum();
            prop_assert!(lo.total_emissions <= nominal + 1e-9);
        }

        #[test]
        fn large_budget_reaches_min_emissions(x in arb_set(), v in 0.0f64..=1.0) {
            let u = [user("u", v, &x, None)];
            let min_e = x.pareto.last().unwrap();
            let need = incentive_amount(&u[0].theta, min_e, &u[0].nominal);
            let r = optimal_incentives(&u, need + 1.0).unwrap();
            prop_assert!((r.offers[0].recommended.emissions - min_e.emissions).abs() <= 1e-9);
        }
    }
}
