//! Planar convex geometry over (travel time, emissions) outcomes.
//!
//! A [`FeasibleSet`] carries both descriptions of the same polytope: the
//! counter-clockwise vertex list and the halfspace system `A·x ≤ b`, plus the
//! Pareto chain (the lower-left boundary). Degenerate sets (segment, point)
//! are supported and encoded with explicit caps so that the halfspace system
//! always describes a bounded set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("convex hull of an empty point set")]
    Empty,
    #[error("outcome point {index} is not finite and strictly positive: ({t}, {e})")]
    InvalidPoint { index: usize, t: f64, e: f64 },
}

/// A (travel time [s], emissions [g]) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomePoint<T> {
    pub travel_time: T,
    pub emissions: T,
}

impl<T: Scalar> OutcomePoint<T> {
    pub fn new(travel_time: T, emissions: T) -> Self {
        Self {
            travel_time,
            emissions,
        }
    }

    /// Weighted cost `w_t·t + w_e·e`.
    #[inline]
    pub fn dot(&self, w: [T; 2]) -> T {
        w[0] * self.travel_time + w[1] * self.emissions
    }

    #[inline]
    pub fn as_array(&self) -> [T; 2] {
        [self.travel_time, self.emissions]
    }

    pub fn from_array(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.travel_time - other.travel_time).hypot(self.emissions - other.emissions)
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::new(self.travel_time * s, self.emissions * s)
    }

    /// Pareto dominance: `self` is no worse in both coordinates and strictly
    /// better in at least one.
    pub fn dominates(&self, other: &Self) -> bool {
        (self.travel_time <= other.travel_time && self.emissions < other.emissions)
            || (self.travel_time < other.travel_time && self.emissions <= other.emissions)
    }

    fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.travel_time
            .partial_cmp(&other.travel_time)
            .unwrap()
            .then(self.emissions.partial_cmp(&other.emissions).unwrap())
    }
}

/// One row of `A·x ≤ b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace<T> {
    pub normal: [T; 2],
    pub offset: T,
}

impl<T: Scalar> Halfspace<T> {
    /// Signed violation `a·x − b`; nonpositive inside.
    #[inline]
    pub fn residual(&self, p: &OutcomePoint<T>) -> T {
        p.dot(self.normal) - self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Polygon,
    Segment,
    Point,
}

/// Convex feasible outcome set of one user class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet<T> {
    /// Counter-clockwise, starting at the lexicographically smallest vertex.
    pub vertices: Vec<OutcomePoint<T>>,
    pub halfspaces: Vec<Halfspace<T>>,
    /// Travel time ascending, emissions strictly descending.
    pub pareto: Vec<OutcomePoint<T>>,
    pub dimension: Dimension,
}

impl<T: Scalar> FeasibleSet<T> {
    pub fn from_points(points: &[OutcomePoint<T>]) -> Result<Self, GeometryError> {
        let vertices = convex_hull(points)?;
        Ok(Self::from_hull(vertices))
    }

    /// Builds the set from an already computed hull (output of [`convex_hull`]).
    pub fn from_hull(vertices: Vec<OutcomePoint<T>>) -> Self {
        let dimension = match vertices.len() {
            1 => Dimension::Point,
            2 => Dimension::Segment,
            _ => Dimension::Polygon,
        };
        let halfspaces = h_representation(&vertices);
        let pareto = pareto_chain(&vertices);
        Self {
            vertices,
            halfspaces,
            pareto,
            dimension,
        }
    }

    /// Row-major `A` (k×2) and `b` of the halfspace system.
    pub fn matrix_form(&self) -> (Vec<[T; 2]>, Vec<T>) {
        self.halfspaces.iter().map(|h| (h.normal, h.offset)).unzip()
    }

    pub fn pareto_front(&self) -> &[OutcomePoint<T>] {
        &self.pareto
    }

    pub fn contains(&self, p: &OutcomePoint<T>, tol: T) -> bool {
        contains(self, p, tol)
    }

    pub fn centroid(&self) -> OutcomePoint<T> {
        let n = T::from_usize(self.vertices.len()).unwrap();
        let (t, e) = self
            .vertices
            .iter()
            .fold((T::zero(), T::zero()), |(t, e), v| {
                (t + v.travel_time, e + v.emissions)
            });
        OutcomePoint::new(t / n, e / n)
    }

    /// Travel-time interval spanned by the Pareto chain.
    pub fn pareto_time_range(&self) -> (T, T) {
        let first = self.pareto.first().expect("nonempty chain");
        let last = self.pareto.last().expect("nonempty chain");
        (first.travel_time, last.travel_time)
    }
}

#[inline]
fn cross<T: Scalar>(o: &OutcomePoint<T>, a: &OutcomePoint<T>, b: &OutcomePoint<T>) -> T {
    (a.travel_time - o.travel_time) * (b.emissions - o.emissions)
        - (a.emissions - o.emissions) * (b.travel_time - o.travel_time)
}

/// `true` when `o → a → b` is a strict left turn beyond the relative
/// collinearity tolerance.
#[inline]
fn left_turn<T: Scalar>(o: &OutcomePoint<T>, a: &OutcomePoint<T>, b: &OutcomePoint<T>) -> bool {
    let c = cross(o, a, b);
    let scale = o.distance(a) * o.distance(b);
    c > T::collinear_tol() * scale
}

/// Monotone-chain convex hull.
///
/// Returns the hull counter-clockwise starting at the lexicographically
/// smallest point, with collinear boundary points removed. All-collinear
/// inputs give the two extreme endpoints, a single (possibly repeated) point
/// gives itself.
pub fn convex_hull<T: Scalar>(
    points: &[OutcomePoint<T>],
) -> Result<Vec<OutcomePoint<T>>, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Empty);
    }
    for (index, p) in points.iter().enumerate() {
        let ok = p.travel_time.is_finite()
            && p.emissions.is_finite()
            && p.travel_time > T::zero()
            && p.emissions > T::zero();
        if !ok {
            return Err(GeometryError::InvalidPoint {
                index,
                t: p.travel_time.to_f64_lossy(),
                e: p.emissions.to_f64_lossy(),
            });
        }
    }

    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.lex_cmp(b));
    pts.dedup();
    if pts.len() <= 2 {
        return Ok(pts);
    }

    let mut lower: Vec<OutcomePoint<T>> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2 && !left_turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<OutcomePoint<T>> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !left_turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);

    // All points collinear: the chains collapse onto the two endpoints.
    if lower.len() == 2 && lower[0] == lower[1] {
        lower.pop();
    }
    Ok(lower)
}

/// Halfspace description of a hull produced by [`convex_hull`].
///
/// Polygons get one outward unit-normal row per edge. A segment gets the two
/// opposed rows of its carrier line plus two end caps; a point gets four
/// axis-aligned caps.
pub fn h_representation<T: Scalar>(vertices: &[OutcomePoint<T>]) -> Vec<Halfspace<T>> {
    match vertices.len() {
        0 => Vec::new(),
        1 => {
            let p = vertices[0];
            let one = T::one();
            let zero = T::zero();
            vec![
                Halfspace {
                    normal: [one, zero],
                    offset: p.travel_time,
                },
                Halfspace {
                    normal: [-one, zero],
                    offset: -p.travel_time,
                },
                Halfspace {
                    normal: [zero, one],
                    offset: p.emissions,
                },
                Halfspace {
                    normal: [zero, -one],
                    offset: -p.emissions,
                },
            ]
        }
        2 => {
            let (p, q) = (vertices[0], vertices[1]);
            let len = p.distance(&q);
            let dir = [
                (q.travel_time - p.travel_time) / len,
                (q.emissions - p.emissions) / len,
            ];
            let side = [dir[1], -dir[0]];
            let side_off = p.dot(side).max(q.dot(side));
            let neg_side = [-side[0], -side[1]];
            let neg_side_off = p.dot(neg_side).max(q.dot(neg_side));
            vec![
                Halfspace {
                    normal: side,
                    offset: side_off,
                },
                Halfspace {
                    normal: neg_side,
                    offset: neg_side_off,
                },
                Halfspace {
                    normal: dir,
                    offset: q.dot(dir),
                },
                Halfspace {
                    normal: [-dir[0], -dir[1]],
                    offset: -p.dot(dir),
                },
            ]
        }
        k => (0..k)
            .map(|i| {
                let p = vertices[i];
                let q = vertices[(i + 1) % k];
                let dt = q.travel_time - p.travel_time;
                let de = q.emissions - p.emissions;
                let len = dt.hypot(de);
                let normal = [de / len, -dt / len];
                Halfspace {
                    normal,
                    offset: p.dot(normal).max(q.dot(normal)),
                }
            })
            .collect(),
    }
}

/// Lower-left boundary chain of a hull produced by [`convex_hull`]: starts at
/// the minimum-time vertex and follows the lower hull while emissions
/// strictly decrease.
pub fn pareto_chain<T: Scalar>(vertices: &[OutcomePoint<T>]) -> Vec<OutcomePoint<T>> {
    let Some(first) = vertices.first() else {
        return Vec::new();
    };
    let mut chain = vec![*first];
    for v in &vertices[1..] {
        let last = chain.last().unwrap();
        if v.emissions < last.emissions && v.travel_time > last.travel_time {
            chain.push(*v);
        } else {
            break;
        }
    }
    chain
}

/// Pareto chain of a feasible set.
pub fn pareto_front<T: Scalar>(feasible: &FeasibleSet<T>) -> Vec<OutcomePoint<T>> {
    pareto_chain(&feasible.vertices)
}

/// Halfspace membership `A·p ≤ b + tol`.
pub fn contains<T: Scalar>(feasible: &FeasibleSet<T>, p: &OutcomePoint<T>, tol: T) -> bool {
    feasible.halfspaces.iter().all(|h| h.residual(p) <= tol)
}

/// Closed Euclidean ball test.
pub fn within_epsilon<T: Scalar>(
    actual: &OutcomePoint<T>,
    recommended: &OutcomePoint<T>,
    eps: T,
) -> bool {
    actual.distance(recommended) <= eps
}

/// `true` when `p` lies on the Pareto polyline of `feasible` within `tol`.
pub fn on_pareto_chain<T: Scalar>(feasible: &FeasibleSet<T>, p: &OutcomePoint<T>, tol: T) -> bool {
    let chain = &feasible.pareto;
    if chain.len() == 1 {
        return chain[0].distance(p) <= tol;
    }
    chain
        .windows(2)
        .any(|w| segment_distance(&w[0], &w[1], p) <= tol)
}

fn segment_distance<T: Scalar>(a: &OutcomePoint<T>, b: &OutcomePoint<T>, p: &OutcomePoint<T>) -> T {
    let dt = b.travel_time - a.travel_time;
    let de = b.emissions - a.emissions;
    let len2 = dt * dt + de * de;
    let s = ((p.travel_time - a.travel_time) * dt + (p.emissions - a.emissions) * de) / len2;
    let s = s.max(T::zero()).min(T::one());
    let proj = OutcomePoint::new(a.travel_time + s * dt, a.emissions + s * de);
    proj.distance(p)
}
