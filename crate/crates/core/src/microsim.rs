//! Single-vehicle longitudinal microsimulation.
//!
//! A vehicle follows the Intelligent Driver Model against virtual standing
//! obstacles (stop lines at stop signs and red signals) and an optional
//! leader, integrated with explicit time steps. Emissions come from an
//! instantaneous rate `c0 + c1·v + c2·v² + c3·max(a, 0)·v` in g/s.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::OutcomePoint;
use crate::netgraph::{Control, Network, NetworkError, Route, RouteSegment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid vehicle type `{id}`: {reason}")]
    InvalidVehicle { id: String, reason: String },
    #[error("invalid driving style ({speed_scale}, {accel_scale}): scales must lie in (0, 1]")]
    InvalidStyle { speed_scale: f64, accel_scale: f64 },
    #[error("time step {0} outside (0, 0.5]")]
    InvalidStep(f64),
    #[error("signal offset {offset} for link `{link}` outside [0, {cycle})")]
    InvalidOffset {
        link: String,
        offset: f64,
        cycle: f64,
    },
    #[error("trip exceeded the {horizon} s horizon at position {position:.1} of {length:.1} m")]
    Horizon {
        horizon: f64,
        position: f64,
        length: f64,
    },
    #[error("route {route}, style {style}, condition {condition}: {source}")]
    Sample {
        route: usize,
        style: usize,
        condition: usize,
        #[source]
        source: Box<SimError>,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("empty {0} grid")]
    EmptyGrid(&'static str),
}

fn default_max_decel() -> f64 {
    9.0
}

fn default_speed_factor() -> f64 {
    1.0
}

/// IDM parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// m/s².
    pub max_accel: f64,
    /// Comfortable deceleration b, m/s².
    pub comfortable_decel: f64,
    /// Desired speed relative to the speed limit.
    #[serde(default = "default_speed_factor")]
    pub desired_speed_factor: f64,
    /// s0, m.
    pub min_gap: f64,
    /// T, s.
    pub time_headway: f64,
    /// δ.
    pub exponent: f64,
    /// Physical braking limit, m/s².
    #[serde(default = "default_max_decel")]
    pub max_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            max_accel: 1.0,
            comfortable_decel: 1.5,
            desired_speed_factor: 1.0,
            min_gap: 2.0,
            time_headway: 1.5,
            exponent: 4.0,
            max_decel: default_max_decel(),
        }
    }
}

/// Emission surrogate coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionCoeffs {
    /// c0, g/s at idle.
    pub idle: f64,
    /// c1, g/m.
    pub linear: f64,
    /// c2, g·s/m².
    pub quadratic: f64,
    /// c3, g·s²/m², multiplies positive power `a·v`.
    pub accel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleType {
    pub id: String,
    #[serde(default)]
    pub idm: IdmParams,
    pub emissions: EmissionCoeffs,
}

impl VehicleType {
    pub fn validate(&self) -> Result<(), SimError> {
        let p = &self.idm;
        let c = &self.emissions;
        let reason = if !(p.max_accel > 0.0
            && p.comfortable_decel > 0.0
            && p.min_gap > 0.0
            && p.time_headway > 0.0)
        {
            Some("max_accel, comfortable_decel, min_gap and time_headway must be positive")
        } else if !(p.exponent >= 1.0) {
            Some("exponent must be at least 1")
        } else if !(p.desired_speed_factor > 0.0) {
            Some("desired_speed_factor must be positive")
        } else if !(p.max_decel >= p.comfortable_decel) {
            Some("max_decel must be at least comfortable_decel")
        } else if !(c.idle > 0.0) {
            Some("idle emission rate must be positive")
        } else if !(c.linear >= 0.0 && c.quadratic >= 0.0 && c.accel >= 0.0) {
            Some("emission coefficients must be non-negative")
        } else {
            None
        };
        match reason {
            Some(r) => Err(SimError::InvalidVehicle {
                id: self.id.clone(),
                reason: r.to_string(),
            }),
            None => Ok(()),
        }
    }
}

/// Scales applied to desired speed and maximum acceleration; `(1, 1)` is
/// normal driving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrivingStyle {
    pub speed_scale: f64,
    pub accel_scale: f64,
}

impl DrivingStyle {
    pub const NORMAL: DrivingStyle = DrivingStyle {
        speed_scale: 1.0,
        accel_scale: 1.0,
    };

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |s: f64| s > 0.0 && s <= 1.0;
        if ok(self.speed_scale) && ok(self.accel_scale) {
            Ok(())
        } else {
            Err(SimError::InvalidStyle {
                speed_scale: self.speed_scale,
                accel_scale: self.accel_scale,
            })
        }
    }
}

/// Piecewise-constant leader speed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSchedule {
    /// Distance of the leader ahead of the vehicle at t = 0, m.
    pub initial_gap: f64,
    /// `(start time s, speed m/s)` pairs, sorted by start time. The speed
    /// before the first entry is the first entry's speed.
    pub phases: Vec<(f64, f64)>,
}

impl LeaderSchedule {
    fn speed_at(&self, t: f64) -> f64 {
        let mut speed = self.phases.first().map_or(0.0, |p| p.1);
        for &(start, v) in &self.phases {
            if t >= start {
                speed = v;
            } else {
                break;
            }
        }
        speed
    }
}

/// Exogenous conditions of one trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrafficCondition {
    /// Phase offset per signalized link id; unlisted signals keep the
    /// network's offset.
    #[serde(default)]
    pub signal_offsets: BTreeMap<String, f64>,
    #[serde(default)]
    pub leader: Option<LeaderSchedule>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Required standstill time at a stop sign, s.
    pub stop_dwell: f64,
    /// Speed below which the vehicle counts as stopped, m/s.
    pub stop_speed: f64,
    /// Distance to the stop line within which a standstill counts, m.
    pub stop_zone: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            horizon: 3600.0,
            stop_dwell: 2.0,
            stop_speed: 0.1,
            stop_zone: 2.0,
        }
    }
}

/// Effective IDM parameters after applying style and speed limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveIdm {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub min_gap: f64,
    pub time_headway: f64,
    pub exponent: f64,
}

/// IDM acceleration. An infinite `gap` means free road.
pub fn idm_acceleration(speed: f64, gap: f64, obstacle_speed: f64, p: &EffectiveIdm) -> f64 {
    let free = 1.0 - (speed / p.desired_speed).powf(p.exponent);
    if !gap.is_finite() {
        return p.max_accel * free;
    }
    let dv = speed - obstacle_speed;
    let desired_gap = p.min_gap
        + (speed * p.time_headway
            + speed * dv / (2.0 * (p.max_accel * p.comfortable_decel).sqrt()))
        .max(0.0);
    let gap = gap.max(1e-3);
    p.max_accel * (free - (desired_gap / gap).powi(2))
}

/// Instantaneous emission rate in g/s.
pub fn emission_rate(speed: f64, accel: f64, c: &EmissionCoeffs) -> f64 {
    c.idle + c.linear * speed + c.quadratic * speed * speed + c.accel * accel.max(0.0) * speed
}

/// Sampled trip. Sample `i` is the state at `time[i]`; `accel[i]` is the
/// acceleration applied over the following step.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub time: Vec<f64>,
    pub position: Vec<f64>,
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
    pub cumulative_emissions: Vec<f64>,
    pub travel_time: f64,
}

impl Trajectory {
    pub fn total_emissions(&self) -> f64 {
        self.cumulative_emissions.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// CSV with header `t,x,v,a,cumulative_e`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,v,a,cumulative_e")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.time[i],
                self.position[i],
                self.speed[i],
                self.accel[i],
                self.cumulative_emissions[i]
            )?;
        }
        Ok(())
    }
}

/// (travel time, total emissions) of a completed trip.
pub fn trip_outcome(traj: &Trajectory) -> OutcomePoint<f64> {
    OutcomePoint::new(traj.travel_time, traj.total_emissions())
}

enum StopState {
    Pending { dwell: f64 },
    Cleared,
}

enum SignalState {
    Undecided,
    Stopping,
    Committed,
}

struct ControlPoint {
    line: f64,
    kind: ControlKind,
}

enum ControlKind {
    Stop(StopState),
    Signal {
        cycle: f64,
        green: f64,
        offset: f64,
        state: SignalState,
    },
}

fn control_points(
    net: &Network,
    segments: &[RouteSegment],
    cond: &TrafficCondition,
) -> Result<Vec<ControlPoint>, SimError> {
    let last = segments.len() - 1;
    let mut points = Vec::new();
    // The final link's control lies beyond the trip end.
    for seg in &segments[..last] {
        match seg.control {
            Control::None => {}
            Control::StopSign => points.push(ControlPoint {
                line: seg.end,
                kind: ControlKind::Stop(StopState::Pending { dwell: 0.0 }),
            }),
            Control::Signal {
                cycle,
                green_fraction,
                offset,
            } => {
                let id = &net.link(seg.link).id;
                let offset = match cond.signal_offsets.get(id) {
                    Some(&o) if (0.0..cycle).contains(&o) => o,
                    Some(&o) => {
                        return Err(SimError::InvalidOffset {
                            link: id.clone(),
                            offset: o,
                            cycle,
                        })
                    }
                    None => offset,
                };
                points.push(ControlPoint {
                    line: seg.end,
                    kind: ControlKind::Signal {
                        cycle,
                        green: green_fraction * cycle,
                        offset,
                        state: SignalState::Undecided,
                    },
                });
            }
        }
    }
    Ok(points)
}

/// Simulates one trip from standstill at the start of `route`.
pub fn simulate_trip(
    net: &Network,
    route: &Route,
    vehicle: &VehicleType,
    style: DrivingStyle,
    condition: &TrafficCondition,
    config: &SimConfig,
) -> Result<Trajectory, SimError> {
    vehicle.validate()?;
    style.validate()?;
    let dt = config.dt;
    if !(dt > 0.0 && dt <= 0.5) {
        return Err(SimError::InvalidStep(dt));
    }
    let segments = route.segments(net);
    let length = segments.last().map_or(0.0, |s| s.end);
    let mut controls = control_points(net, &segments, condition)?;

    let idm = &vehicle.idm;
    let a_max = style.accel_scale * idm.max_accel;
    let speed_factor = style.speed_scale * idm.desired_speed_factor;
    let base = EffectiveIdm {
        desired_speed: 0.0,
        max_accel: a_max,
        comfortable_decel: idm.comfortable_decel,
        min_gap: idm.min_gap,
        time_headway: idm.time_headway,
        exponent: idm.exponent,
    };

    let mut traj = Trajectory {
        dt,
        ..Default::default()
    };
    let (mut t, mut x, mut v, mut e) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut seg_idx = 0;
    let mut leader_pos = condition.leader.as_ref().map(|l| l.initial_gap);

    loop {
        if t > config.horizon {
            return Err(SimError::Horizon {
                horizon: config.horizon,
                position: x,
                length,
            });
        }
        while seg_idx + 1 < segments.len() && x >= segments[seg_idx].end {
            seg_idx += 1;
        }

        // Desired speed: lowest limit within the anticipation distance.
        let reach = x + v * idm.time_headway + v * v / (2.0 * idm.comfortable_decel);
        let limit = segments[seg_idx..]
            .iter()
            .take_while(|s| s.start <= reach)
            .map(|s| s.speed_limit)
            .fold(f64::INFINITY, f64::min);
        let params = EffectiveIdm {
            desired_speed: speed_factor * limit,
            ..base
        };

        let mut accel = idm_acceleration(v, f64::INFINITY, 0.0, &params);

        for cp in controls.iter_mut() {
            if cp.line <= x - config.stop_zone {
                continue;
            }
            let dist = cp.line - x;
            let blocking = match &mut cp.kind {
                ControlKind::Stop(state) => match state {
                    StopState::Cleared => false,
                    StopState::Pending { dwell } => {
                        if dist.abs() <= config.stop_zone && v < config.stop_speed {
                            *dwell += dt;
                        }
                        if *dwell >= config.stop_dwell - 1e-9 {
                            *state = StopState::Cleared;
                            false
                        } else {
                            true
                        }
                    }
                },
                ControlKind::Signal {
                    cycle,
                    green,
                    offset,
                    state,
                } => {
                    if dist <= 0.0 {
                        false
                    } else {
                        let phase = (t + *offset).rem_euclid(*cycle);
                        if phase < *green {
                            *state = SignalState::Undecided;
                            false
                        } else {
                            if let SignalState::Undecided = state {
                                // Too close to stop comfortably: proceed.
                                *state = if v * v / (2.0 * dist) > idm.comfortable_decel {
                                    SignalState::Committed
                                } else {
                                    SignalState::Stopping
                                };
                            }
                            matches!(state, SignalState::Stopping)
                        }
                    }
                }
            };
            if blocking {
                let gap = dist + idm.min_gap;
                accel = accel.min(idm_acceleration(v, gap, 0.0, &params));
                break;
            }
        }

        if let (Some(lp), Some(leader)) = (leader_pos, condition.leader.as_ref()) {
            accel = accel.min(idm_acceleration(v, lp - x, leader.speed_at(t), &params));
        }

        let accel = accel.clamp(-idm.max_decel, a_max);
        let v_next = (v + accel * dt).max(0.0);
        let applied = (v_next - v) / dt;
        let x_next = x + 0.5 * (v + v_next) * dt;
        let rate = emission_rate(0.5 * (v + v_next), applied, &vehicle.emissions);

        traj.time.push(t);
        traj.position.push(x);
        traj.speed.push(v);
        traj.accel.push(applied);
        traj.cumulative_emissions.push(e);

        if x_next >= length {
            let frac = if x_next > x {
                (length - x) / (x_next - x)
            } else {
                1.0
            };
            t += frac * dt;
            e += rate * frac * dt;
            traj.time.push(t);
            traj.position.push(length);
            traj.speed.push(v + applied * frac * dt);
            traj.accel.push(0.0);
            traj.cumulative_emissions.push(e);
            traj.travel_time = t;
            return Ok(traj);
        }

        if let (Some(lp), Some(leader)) = (leader_pos.as_mut(), condition.leader.as_ref()) {
            *lp += leader.speed_at(t) * dt;
        }
        t += dt;
        x = x_next;
        v = v_next;
        e += rate * dt;
    }
}

/// Sampled outcomes of one route.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteCloud {
    pub route: Route,
    /// One point per (style, condition) pair, style-major.
    pub points: Vec<OutcomePoint<f64>>,
}

/// Simulates every (style, condition) pair on each of the `p` shortest
/// routes between `origin` and `destination`. Output order is style-major
/// within each route and independent of scheduling.
pub fn generate_outcome_cloud(
    net: &Network,
    origin: &str,
    destination: &str,
    vehicle: &VehicleType,
    p: usize,
    styles: &[DrivingStyle],
    conditions: &[TrafficCondition],
    config: &SimConfig,
) -> Result<Vec<RouteCloud>, SimError> {
    if styles.is_empty() {
        return Err(SimError::EmptyGrid("style"));
    }
    if conditions.is_empty() {
        return Err(SimError::EmptyGrid("condition"));
    }
    let routes = net.k_shortest_routes(origin, destination, p)?;
    routes
        .into_iter()
        .enumerate()
        .map(|(ri, route)| {
            let jobs: Vec<(usize, usize)> = (0..styles.len())
                .flat_map(|s| (0..conditions.len()).map(move |c| (s, c)))
                .collect();
            let points = jobs
                .par_iter()
                .map(|&(si, ci)| {
                    simulate_trip(net, &route, vehicle, styles[si], &conditions[ci], config)
                        .map(|traj| trip_outcome(&traj))
                        .map_err(|e| SimError::Sample {
                            route: ri,
                            style: si,
                            condition: ci,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RouteCloud { route, points })
        })
        .collect()
}
