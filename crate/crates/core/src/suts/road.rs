use std::f64::consts::FRAC_PI_2;

use super::{check_dim, InputLayout, Sut, SutError};
use crate::signals::{Signal, SignalRanges, Trace};

/// First control point.
pub const START: (f64, f64) = (100.0, 10.0);
/// Distance between consecutive control points.
pub const SEGMENT_LENGTH: f64 = 15.0;
/// Largest curvature magnitude (radians per unit traveled).
pub const MAX_CURVATURE: f64 = 0.07;

const MAX_TURN: f64 = 1.2;
const STEP: f64 = 1.0;
const DT: f64 = 0.1;
const MAX_STEER: f64 = 0.05;
const LOOKAHEAD: f64 = 10.0;
/// Distance threshold of the default requirement.
pub const DISTANCE_LIMIT: f64 = 12.0;

type Point = (f64, f64);

/// Control points `p_1 .. p_{d+1}` of a road.
#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub points: Vec<Point>,
}

/// Builds a road heading up from [`START`]; each curvature turns the heading
/// by `15 c` before the next 15-unit step.
pub fn curvature_to_road(curvatures: &[f64]) -> Road {
    let mut heading = FRAC_PI_2;
    let mut p = START;
    let mut points = vec![p];
    for c in curvatures {
        heading += c * SEGMENT_LENGTH;
        p = (p.0 + SEGMENT_LENGTH * heading.cos(), p.1 + SEGMENT_LENGTH * heading.sin());
        points.push(p);
    }
    Road { points }
}

/// `K_d (d + 1)` for the supported segment counts.
pub fn path_length_constant(d: usize) -> Option<f64> {
    match d {
        5 => Some(39.79),
        7 => Some(51.57),
        9 => Some(66.89),
        _ => None,
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0) && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
}

/// Whether closed segments `ab` and `cd` share a point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

fn wrap(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Non-adjacent segments are disjoint and no control point turns more than 1.2 rad.
pub fn road_is_valid(road: &Road) -> bool {
    let p = &road.points;
    let mut heading = FRAC_PI_2;
    for w in p.windows(2) {
        let h = (w[1].1 - w[0].1).atan2(w[1].0 - w[0].0);
        if wrap(h - heading).abs() > MAX_TURN {
            return false;
        }
        heading = h;
    }
    let n = p.len().saturating_sub(1);
    for i in 0..n {
        for j in i + 2..n {
            if segments_intersect(p[i], p[i + 1], p[j], p[j + 1]) {
                return false;
            }
        }
    }
    true
}

/// Nearest point on the polyline: (distance, arc length).
fn nearest(points: &[Point], q: Point) -> (f64, f64) {
    let mut best = (f64::INFINITY, 0.0);
    let mut arc = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
        let (px, py) = (a.0 + t * dx, a.1 + t * dy);
        let d = ((q.0 - px).powi(2) + (q.1 - py).powi(2)).sqrt();
        if d < best.0 {
            best = (d, arc + t * len2.sqrt());
        }
        arc += len2.sqrt();
    }
    best
}

/// Point at arc length `s`, extrapolated along the last segment past the end.
fn point_at(points: &[Point], mut s: f64) -> Point {
    let last = points.len() - 2;
    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if s <= len || i == last {
            let t = s / len;
            return (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        }
        s -= len;
    }
    unreachable!("roads have at least one segment")
}

/// Point-mass follower on a road with `d` curvature inputs.
///
/// The follower starts on `START` facing up, moves one unit per 0.1 s step and
/// turns at most 0.05 rad per step toward the road point 10 units of arc
/// beyond its nearest road point. It runs `15 d` steps; the output `dist` is
/// its distance to the polyline.
#[derive(Debug, Clone)]
pub struct PathFollow {
    segments: usize,
    inputs: InputLayout,
    outputs: SignalRanges,
}

impl PathFollow {
    pub fn new(segments: usize) -> Result<Self, SutError> {
        if path_length_constant(segments).is_none() {
            return Err(SutError::InvalidTest(format!(
                "pathfollow supports 5, 7 or 9 segments, got {segments}"
            )));
        }
        let horizon = SEGMENT_LENGTH * segments as f64;
        Ok(PathFollow {
            segments,
            inputs: InputLayout::Vector(vec![(-MAX_CURVATURE, MAX_CURVATURE); segments]),
            outputs: SignalRanges::new().with("dist", 0.0, horizon),
        })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn road(&self, test: &[f64]) -> Result<Road, SutError> {
        Ok(curvature_to_road(&self.inputs.raw(test)?))
    }

    /// Follower positions and distances, one per step including the start.
    pub fn drive(road: &Road, steps: usize) -> (Vec<Point>, Vec<f64>) {
        let mut pos = road.points[0];
        let mut heading = FRAC_PI_2;
        let mut path = vec![pos];
        let mut dist = vec![nearest(&road.points, pos).0];
        for _ in 0..steps {
            let (_, s) = nearest(&road.points, pos);
            let target = point_at(&road.points, s + LOOKAHEAD);
            let want = (target.1 - pos.1).atan2(target.0 - pos.0);
            heading += wrap(want - heading).clamp(-MAX_STEER, MAX_STEER);
            pos = (pos.0 + STEP * heading.cos(), pos.1 + STEP * heading.sin());
            path.push(pos);
            dist.push(nearest(&road.points, pos).0);
        }
        (path, dist)
    }
}

impl Sut for PathFollow {
    fn name(&self) -> &str {
        "pathfollow"
    }

    fn inputs(&self) -> &InputLayout {
        &self.inputs
    }

    fn outputs(&self) -> &SignalRanges {
        &self.outputs
    }

    fn simulate(&self, test: &[f64]) -> Result<Trace, SutError> {
        check_dim(self.segments, test)?;
        let road = self.road(test)?;
        let (_, dist) = Self::drive(&road, self.steps());
        Ok(Trace::new(vec![Signal::new("dist", 0.0, DT, dist)?])?)
    }

    fn default_requirement(&self) -> String {
        let horizon = self.steps() as f64 * DT;
        format!("always[0,{horizon:.1}] (dist <= {DISTANCE_LIMIT})")
    }

    fn has_validity(&self) -> bool {
        true
    }

    fn is_valid(&self, test: &[f64]) -> bool {
        self.road(test).map(|r| road_is_valid(&r)).unwrap_or(false)
    }
}

impl PathFollow {
    fn steps(&self) -> usize {
        SEGMENT_LENGTH as usize * self.segments
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn straight_road() {
        let road = curvature_to_road(&[0.0; 5]);
        for (k, p) in road.points.iter().enumerate() {
            assert!((p.0 - 100.0).abs() < 1e-12);
            assert!((p.1 - (10.0 + 15.0 * k as f64)).abs() < 1e-12);
        }
        let pf = PathFollow::new(5).unwrap();
        let tr = pf.simulate(&[0.0; 5]).unwrap();
        assert_eq!(tr.len(), 76);
        assert!(tr.get("dist").unwrap().values.iter().all(|d| *d < 1e-9));
    }

    #[test]
    fn first_turn_is_applied_before_the_step() {
        let road = curvature_to_road(&[0.07, 0.0]);
        // cos(90deg + a) = -sin a, sin(90deg + a) = cos a.
        let want = (100.0 - 15.0 * 1.05f64.sin(), 10.0 + 15.0 * 1.05f64.cos());
        assert!((road.points[1].0 - want.0).abs() < 1e-12 && (road.points[1].1 - want.1).abs() < 1e-12);
    }

    #[test]
    fn mirrored_curvatures_mirror_the_road() {
        let c = [0.03, -0.05, 0.07, 0.01, -0.02];
        let m: Vec<f64> = c.iter().map(|v| -v).collect();
        let (a, b) = (curvature_to_road(&c), curvature_to_road(&m));
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.0 - 100.0 + (q.0 - 100.0)).abs() < 1e-9);
            assert!((p.1 - q.1).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_back_is_invalid() {
        let road = curvature_to_road(&[0.07, 0.07, 0.07, 0.07, 0.07, 0.07, 0.07]);
        assert!(!road_is_valid(&road));
        let pf = PathFollow::new(7).unwrap();
        assert!(!pf.is_valid(&[1.0; 7]));
        assert!(pf.is_valid(&[0.0; 7]));
    }

    #[test]
    fn sharp_turns_cost_distance() {
        let pf = PathFollow::new(5).unwrap();
        let peak = |t: &[f64]| {
            pf.simulate(t).unwrap().get("dist").unwrap().values.iter().cloned().fold(0.0, f64::max)
        };
        assert!(peak(&[1.0; 5]) > peak(&[0.0; 5]) + 1.0);
    }

    #[test]
    fn crossing_segments() {
        assert!(segments_intersect((0.0, 0.0), (2.0, 2.0), (0.0, 2.0), (2.0, 0.0)));
        assert!(segments_intersect((0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (3.0, 0.0)));
        assert!(segments_intersect((0.0, 0.0), (2.0, 0.0), (2.0, 0.0), (2.0, 5.0)));
        assert!(!segments_intersect((0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)));
        assert!(!segments_intersect((0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.4, 0.6)));
    }

    /// Independent check: solve `a + s(b - a) = c + t(d - c)` and sample collinear overlaps.
    fn brute_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
        let r = (b.0 - a.0, b.1 - a.1);
        let q = (d.0 - c.0, d.1 - c.1);
        let den = r.0 * q.1 - r.1 * q.0;
        let w = (c.0 - a.0, c.1 - a.1);
        if den.abs() > 1e-12 {
            let s = (w.0 * q.1 - w.1 * q.0) / den;
            let t = (w.0 * r.1 - w.1 * r.0) / den;
            return (-1e-12..=1.0 + 1e-12).contains(&s) && (-1e-12..=1.0 + 1e-12).contains(&t);
        }
        (0..=1000).any(|k| {
            let s = k as f64 / 1000.0;
            let p = (a.0 + s * r.0, a.1 + s * r.1);
            let t = ((p.0 - c.0) * q.0 + (p.1 - c.1) * q.1) / (q.0 * q.0 + q.1 * q.1);
            let e = (c.0 + t.clamp(0.0, 1.0) * q.0 - p.0, c.1 + t.clamp(0.0, 1.0) * q.1 - p.1);
            e.0.hypot(e.1) < 1e-9
        })
    }

    #[test]
    fn validity_agrees_with_brute_force() {
        let mut rng = seeded(11);
        let pf = PathFollow::new(9).unwrap();
        let (mut valid, mut invalid) = (0, 0);
        for _ in 0..1000 {
            // Bias toward tight curls so both outcomes occur.
            let lo = rng.gen_range(0.0..0.8);
            let t: Vec<f64> = (0..9)
                .map(|_| rng.gen_range(lo..=1.0) * if rng.gen_bool(0.95) { 1.0 } else { -1.0 })
                .collect();
            let road = pf.road(&t).unwrap();
            let p = &road.points;
            let crosses = (0..9).any(|i| (i + 2..9).any(|j| brute_intersect(p[i], p[i + 1], p[j], p[j + 1])));
            let turns = t.iter().any(|c| (c * MAX_CURVATURE * SEGMENT_LENGTH).abs() > MAX_TURN);
            assert_eq!(pf.is_valid(&t), !(crosses || turns), "{t:?}");
            if pf.is_valid(&t) {
                valid += 1;
            } else {
                invalid += 1;
            }
        }
        assert!(valid > 50 && invalid > 50, "{valid} {invalid}");
    }
}
