//! Waypoint reference generation.
//!
//! Segments are joined into a piecewise-linear position profile. The
//! heading target changes in steps at segment starts and is rate limited
//! into a ramp. Both then pass through a first-order smoother, evaluated in
//! closed form over the linear pieces so the reference is a pure function
//! of time.

use nalgebra::{SVector, Vector1, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::Reference;
use crate::vehicle::wrap_angle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    TakeoffClimb,
    CruiseLeg,
    HoverHold,
    DescendLand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingMode {
    /// Keep the previous heading target.
    #[default]
    Hold,
    /// Point along the horizontal direction of travel.
    Track,
}

/// One leg of the flight plan. Every segment starts where the previous one
/// ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySegment {
    pub kind: SegmentKind,
    /// End point `[north, east, altitude]` [m]. Not used by hover-hold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<[f64; 3]>,
    /// Travel speed along the leg [m/s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default)]
    pub heading: HeadingMode,
    /// Hold time for hover-hold [s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

impl TrajectorySegment {
    pub fn moving(kind: SegmentKind, target: [f64; 3], speed: f64, heading: HeadingMode) -> Self {
        TrajectorySegment {
            kind,
            target: Some(target),
            speed: Some(speed),
            heading,
            duration: None,
        }
    }

    pub fn hover(duration: f64) -> Self {
        TrajectorySegment {
            kind: SegmentKind::HoverHold,
            target: None,
            speed: None,
            heading: HeadingMode::Hold,
            duration: Some(duration),
        }
    }
}

fn default_smoothing() -> f64 {
    0.5
}

fn default_heading_rate() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// `[north, east, altitude]` at t = 0 [m].
    pub start: [f64; 3],
    /// Initial heading [deg].
    #[serde(default)]
    pub heading_deg: f64,
    /// Smoother time constant [s]; 0 disables smoothing.
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
    /// Heading rate limit [deg/s].
    #[serde(default = "default_heading_rate")]
    pub heading_rate_deg: f64,
    pub segments: Vec<TrajectorySegment>,
}

fn ned(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], -p[2])
}

fn bad(index: usize, field: &str, reason: impl Into<String>) -> Error {
    Error::invalid(format!("trajectory.segments[{index}].{field}"), reason)
}

type Knots<const D: usize> = Vec<(f64, SVector<f64, D>)>;

/// Precomputed knots of the raw profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProfile {
    position: Knots<3>,
    heading: Knots<1>,
    smoothing: f64,
    end_time: f64,
}

impl ReferenceProfile {
    pub fn new(cfg: &TrajectoryConfig) -> Result<Self> {
        if !(cfg.smoothing >= 0.0 && cfg.smoothing.is_finite()) {
            return Err(Error::invalid("trajectory.smoothing", "must be >= 0"));
        }
        if !(cfg.heading_rate_deg > 0.0) {
            return Err(Error::invalid("trajectory.heading_rate_deg", "must be > 0"));
        }
        if !cfg.start.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("trajectory.start", "must be finite"));
        }
        let mut t = 0.0;
        let mut here = ned(cfg.start);
        let mut position = vec![(0.0, here)];
        // heading steps (time, unwrapped target)
        let mut desired = cfg.heading_deg.to_radians();
        let mut steps = vec![(0.0, desired)];

        for (i, seg) in cfg.segments.iter().enumerate() {
            if seg.kind == SegmentKind::HoverHold {
                let d = seg.duration.ok_or_else(|| bad(i, "duration", "hover-hold needs a duration"))?;
                if !(d > 0.0 && d.is_finite()) {
                    return Err(bad(i, "duration", "must be > 0"));
                }
                if let Some(target) = seg.target {
                    if (ned(target) - here).norm() > 1e-9 {
                        return Err(bad(i, "target", "hover-hold must stay at the previous waypoint"));
                    }
                }
                t += d;
                position.push((t, here));
                continue;
            }
            let target = ned(seg.target.ok_or_else(|| bad(i, "target", "missing"))?);
            let speed = seg.speed.ok_or_else(|| bad(i, "speed", "missing"))?;
            if !(speed > 0.0 && speed.is_finite()) {
                return Err(bad(i, "speed", "must be > 0"));
            }
            if !target.iter().all(|x| x.is_finite()) {
                return Err(bad(i, "target", "must be finite"));
            }
            let delta = target - here;
            match seg.kind {
                SegmentKind::TakeoffClimb if delta.z >= 0.0 => {
                    return Err(bad(i, "target", "takeoff-climb must gain altitude"));
                }
                SegmentKind::DescendLand if delta.z <= 0.0 => {
                    return Err(bad(i, "target", "descend-land must lose altitude"));
                }
                _ => {}
            }
            let length = delta.norm();
            if length < 1e-9 {
                return Err(bad(i, "target", "zero-length leg"));
            }
            if seg.heading == HeadingMode::Track && delta.xy().norm() > 1e-9 {
                desired += wrap_angle(delta.y.atan2(delta.x) - desired);
                steps.push((t, desired));
            }
            t += length / speed;
            here = target;
            position.push((t, here));
        }

        Ok(ReferenceProfile {
            position,
            heading: rate_limit(&steps, cfg.heading_rate_deg.to_radians()),
            smoothing: cfg.smoothing,
            end_time: t,
        })
    }

    /// Time at which the raw profile reaches its last waypoint [s].
    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    /// Smoothed reference at `t`; held at the final waypoint after the end.
    pub fn at(&self, t: f64) -> Reference {
        let t = t.max(0.0);
        Reference {
            position: smooth(&self.position, t, self.smoothing),
            heading: wrap_angle(smooth(&self.heading, t, self.smoothing).x),
        }
    }

    /// Raw, unsmoothed position at `t`.
    pub fn raw_position(&self, t: f64) -> Vector3<f64> {
        let (_, v) = locate(&self.position, t.max(0.0));
        v
    }
}

/// Reference at `t` for the trajectory described by `cfg`.
pub fn generate_reference(t: f64, cfg: &TrajectoryConfig) -> Result<Reference> {
    Ok(ReferenceProfile::new(cfg)?.at(t))
}

fn rate_limit(steps: &[(f64, f64)], rate: f64) -> Knots<1> {
    let mut value = steps[0].1;
    let mut knots = vec![(0.0, Vector1::new(value))];
    for (i, &(start, target)) in steps.iter().enumerate() {
        let next = steps.get(i + 1).map_or(f64::INFINITY, |s| s.0);
        if (target - value).abs() < 1e-15 {
            continue;
        }
        if knots.last().is_some_and(|k| k.0 < start) {
            knots.push((start, Vector1::new(value)));
        }
        let reach = start + (target - value).abs() / rate;
        if reach <= next {
            value = target;
            knots.push((reach, Vector1::new(value)));
        } else {
            value += (target - value).signum() * rate * (next - start);
            knots.push((next, Vector1::new(value)));
        }
    }
    knots
}

/// Value of the piecewise-linear knots at `t`, with the segment index.
fn locate<const D: usize>(knots: &Knots<D>, t: f64) -> (usize, SVector<f64, D>) {
    for i in 0..knots.len() - 1 {
        let (a, ua) = knots[i];
        let (b, ub) = knots[i + 1];
        if t < b {
            let s = if b > a { (t - a) / (b - a) } else { 1.0 };
            return (i, ua + (ub - ua) * s);
        }
    }
    (knots.len() - 1, knots[knots.len() - 1].1)
}

/// Exact response of `T ẏ + y = u` to the piecewise-linear `u`, with
/// `y(0) = u(0)`.
fn smooth<const D: usize>(knots: &Knots<D>, t: f64, tc: f64) -> SVector<f64, D> {
    if tc == 0.0 {
        return locate(knots, t).1;
    }
    let mut y = knots[0].1;
    for i in 0..knots.len() {
        let (a, ua) = knots[i];
        if t <= a {
            break;
        }
        let (b, slope) = match knots.get(i + 1) {
            Some(&(b1, ub)) if b1 > a => (b1.min(t), (ub - ua) / (b1 - a)),
            Some(&(b1, _)) => (b1.min(t), SVector::zeros()),
            None => (t, SVector::zeros()),
        };
        let ub = ua + slope * (b - a);
        let decay = (-(b - a) / tc).exp();
        y = ub - slope * tc + (y - ua + slope * tc) * decay;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cruise() -> TrajectoryConfig {
        TrajectoryConfig {
            start: [0.0, 0.0, 5.0],
            heading_deg: 0.0,
            smoothing: 0.5,
            heading_rate_deg: 30.0,
            segments: vec![
                TrajectorySegment::hover(2.0),
                TrajectorySegment::moving(SegmentKind::CruiseLeg, [0.0, 10.0, 5.0], 2.0, HeadingMode::Track),
                TrajectorySegment::hover(10.0),
            ],
        }
    }

    #[test]
    fn starts_at_start() {
        let cfg = cruise();
        let r = generate_reference(0.0, &cfg).unwrap();
        assert_eq!(r.position, Vector3::new(0.0, 0.0, -5.0));
        assert_eq!(r.heading, 0.0);
    }

    #[test]
    fn hover_hold_is_constant() {
        let p = ReferenceProfile::new(&cruise()).unwrap();
        for t in [0.0, 0.5, 1.0, 1.99] {
            assert_eq!(p.at(t).position, Vector3::new(0.0, 0.0, -5.0));
        }
    }

    #[test]
    fn cruise_leg_lags_behind_the_rate_limit() {
        let p = ReferenceProfile::new(&cruise()).unwrap();
        let waypoint = Vector3::new(0.0, 10.0, -5.0);
        // 10 m at 2 m/s takes 5 s raw; the smoother keeps it short of the end
        assert_relative_eq!(p.raw_position(7.0), waypoint, epsilon = 1e-12);
        assert!((p.at(7.0).position - waypoint).norm() > 0.1);
        assert!((p.at(7.0 + 10.0 * 0.5).position - waypoint).norm() < 1e-2);
        assert_relative_eq!(p.at(40.0).position, waypoint, epsilon = 1e-9);
    }

    #[test]
    fn heading_turns_at_the_rate_limit() {
        let mut cfg = cruise();
        cfg.smoothing = 0.0;
        let p = ReferenceProfile::new(&cfg).unwrap();
        // east is +90 deg, reached after 3 s at 30 deg/s
        assert_relative_eq!(p.at(3.0).heading.to_degrees(), 30.0, epsilon = 1e-9);
        assert_relative_eq!(p.at(5.0).heading.to_degrees(), 90.0, epsilon = 1e-9);
        assert_relative_eq!(p.at(20.0).heading.to_degrees(), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_matches_fine_euler() {
        let p = ReferenceProfile::new(&cruise()).unwrap();
        let dt = 1e-5;
        let mut y = p.raw_position(0.0);
        let mut t = 0.0;
        while t < 6.0 - 1e-12 {
            y += (p.raw_position(t + dt / 2.0) - y) * (dt / 0.5);
            t += dt;
        }
        assert_relative_eq!(y, p.at(6.0).position, epsilon = 1e-4);
    }

    #[test]
    fn rejects_bad_segments() {
        let mut cfg = cruise();
        cfg.segments[1].speed = Some(0.0);
        assert!(ReferenceProfile::new(&cfg).is_err());
        let mut cfg = cruise();
        cfg.segments[0].duration = None;
        assert!(ReferenceProfile::new(&cfg).is_err());
        let mut cfg = cruise();
        cfg.segments.push(TrajectorySegment::moving(SegmentKind::TakeoffClimb, [0.0, 10.0, 4.0], 1.0, HeadingMode::Hold));
        let err = ReferenceProfile::new(&cfg).unwrap_err().to_string();
        assert!(err.contains("segments[3]"), "{err}");
    }

    proptest! {
        #[test]
        fn reference_speed_is_bounded(
            legs in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64, 1.0..15.0f64, 0.5..3.0f64), 1..5),
            t in 0.0..80.0f64,
        ) {
            let segments: Vec<_> = legs.iter()
                .map(|&(n, e, h, v)| TrajectorySegment::moving(SegmentKind::CruiseLeg, [n, e, h], v, HeadingMode::Track))
                .collect();
            let cfg = TrajectoryConfig {
                start: [0.0, 0.0, 0.5],
                heading_deg: 0.0,
                smoothing: 0.5,
                heading_rate_deg: 30.0,
                segments,
            };
            let Ok(p) = ReferenceProfile::new(&cfg) else { return Ok(()); };
            let vmax = legs.iter().map(|l| l.3).fold(0.0, f64::max);
            let h = 1e-4;
            let v = (p.at(t + h).position - p.at(t).position).norm() / h;
            prop_assert!(v <= vmax * (1.0 + 1e-3) + 1e-6, "v = {v}");
            let r = wrap_angle(p.at(t + h).heading - p.at(t).heading).abs() / h;
            prop_assert!(r <= 30f64.to_radians() * (1.0 + 1e-3) + 1e-6);
        }
    }
}
