//! Eco-driving incentive planning.
//!
//! Simulated trips give each user a convex set of achievable
//! (travel time, emissions) outcomes. A planner with a fixed budget chooses a
//! recommended outcome and a payment per user so that total emissions are
//! minimized while every user is exactly compensated for the extra cost
//! relative to their own preferred outcome.
//!
//! The numeric core ([`geometry`], [`lp`], [`mechanism`], [`prefs`]) is
//! generic over [`Scalar`] (`f32` or `f64`); the aliases at the crate root fix
//! it to `f64`, with `F32` variants for single precision.

pub mod geometry;
pub mod harness;
pub mod lp;
pub mod mechanism;
pub mod microsim;
pub mod netgraph;
pub mod prefs;
pub mod scalar;

pub use mechanism::{MechanismError, MechanismKind};
pub use scalar::Scalar;

pub type OutcomePoint = geometry::OutcomePoint<f64>;
pub type FeasibleSet = geometry::FeasibleSet<f64>;
pub type LinearProgram = lp::LinearProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type Theta = mechanism::Theta<f64>;
pub type UserProfile = mechanism::UserProfile<f64>;
pub type Participant = mechanism::Participant<f64>;
pub type IncentiveOffer = mechanism::IncentiveOffer<f64>;
pub type MechanismResult = mechanism::MechanismResult<f64>;
pub type ThetaEstimate = prefs::ThetaEstimate<f64>;

pub type OutcomePointF32 = geometry::OutcomePoint<f32>;
pub type FeasibleSetF32 = geometry::FeasibleSet<f32>;
pub type LinearProgramF32 = lp::LinearProgram<f32>;
pub type LpSolutionF32 = lp::LpSolution<f32>;
pub type ThetaF32 = mechanism::Theta<f32>;
pub type ParticipantF32 = mechanism::Participant<f32>;
pub type MechanismResultF32 = mechanism::MechanismResult<f32>;
pub type ThetaEstimateF32 = prefs::ThetaEstimate<f32>;
