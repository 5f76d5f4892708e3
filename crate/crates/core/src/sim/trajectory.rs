use nalgebra::{Isometry3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::SimError;

/// End-effector or object pose in the world frame (z up, table surface at z = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(translation: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            orientation: renormalize(orientation),
        }
    }

    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            orientation: UnitQuaternion::identity(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Quaternion as `[x, y, z, w]`.
    pub fn orientation_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn from_xyzw(translation: [f64; 3], q: [f64; 4]) -> Result<Self, SimError> {
        let quat = Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = quat.norm();
        if !(norm.is_finite() && norm > 1e-9) {
            return Err(SimError::InvalidQuaternion(q));
        }
        Ok(Self::new(
            Vector3::from(translation),
            UnitQuaternion::from_quaternion(quat),
        ))
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// `self ∘ other`: `other` expressed in `self`'s frame, mapped to the world.
    pub fn compose(&self, other: &Pose) -> Pose {
        Self::from_isometry(&(self.to_isometry() * other.to_isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Self::from_isometry(&self.to_isometry().inverse())
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.translation
    }

    /// Rotation angle between the two orientations, in radians.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        self.orientation.angle_to(&other.orientation)
    }
}

pub(crate) fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Quintic minimum-jerk time scaling `10τ³ − 15τ⁴ + 6τ⁵` on `[0, 1]`.
pub fn min_jerk_scalar(tau: f64) -> Result<f64, SimError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(SimError::Domain(format!("tau {tau} outside [0, 1]")));
    }
    Ok(tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau)))
}

/// Great-circle interpolation along the shortest arc. The goal is flipped into
/// the start's hemisphere first, so antipodal representations of the same
/// rotation do not take the long way round.
pub fn slerp_shortest(
    start: &UnitQuaternion<f64>,
    goal: &UnitQuaternion<f64>,
    s: f64,
) -> UnitQuaternion<f64> {
    let q0 = start.into_inner();
    let mut q1 = goal.into_inner();
    let mut dot = q0.dot(&q1);
    if dot < 0.0 {
        q1 = -q1;
        dot = -dot;
    }
    let dot = dot.min(1.0);
    let theta = dot.acos();
    let q = if theta < 1e-9 {
        q0 * (1.0 - s) + q1 * s
    } else {
        let sin_theta = theta.sin();
        q0 * (((1.0 - s) * theta).sin() / sin_theta) + q1 * ((s * theta).sin() / sin_theta)
    };
    UnitQuaternion::new_normalize(q)
}

/// A point-to-point minimum-jerk move of the end effector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub start: Pose,
    pub goal: Pose,
    /// Seconds.
    pub duration: f64,
    /// Segment start time, seconds of sim time.
    pub t0: f64,
}

impl TrajectorySegment {
    pub fn new(start: Pose, goal: Pose, duration: f64, t0: f64) -> Result<Self, SimError> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(SimError::Domain(format!(
                "segment duration must be positive, got {duration}"
            )));
        }
        Ok(Self {
            start,
            goal,
            duration,
            t0,
        })
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.duration
    }

    pub fn pose_at(&self, t: f64) -> Result<Pose, SimError> {
        if !(self.t0..=self.end_time()).contains(&t) {
            return Err(SimError::Domain(format!(
                "t = {t} outside segment [{}, {}]",
                self.t0,
                self.end_time()
            )));
        }
        let tau = ((t - self.t0) / self.duration).clamp(0.0, 1.0);
        Ok(self.pose_at_phase(tau))
    }

    /// Pose at normalized phase `tau ∈ [0, 1]`; endpoints are returned exactly.
    pub fn pose_at_phase(&self, tau: f64) -> Pose {
        if tau <= 0.0 {
            return self.start;
        }
        if tau >= 1.0 {
            return self.goal;
        }
        let s = min_jerk_scalar(tau).expect("tau in range");
        let translation = self.start.translation + (self.goal.translation - self.start.translation) * s;
        let orientation = slerp_shortest(&self.start.orientation, &self.goal.orientation, s);
        Pose {
            translation,
            orientation,
        }
    }
}

/// Default segment duration from a cruise-speed heuristic.
pub fn cruise_duration(from: &Pose, to: &Pose, cruise_speed: f64, min_duration: f64) -> f64 {
    let distance = (to.translation - from.translation).norm();
    min_duration.max(distance / cruise_speed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn min_jerk_boundaries_and_midpoint() {
        assert_eq!(min_jerk_scalar(0.0).unwrap(), 0.0);
        assert_eq!(min_jerk_scalar(1.0).unwrap(), 1.0);
        assert_eq!(min_jerk_scalar(0.5).unwrap(), 0.5);
    }

    #[test]
    fn min_jerk_rejects_out_of_range() {
        assert!(min_jerk_scalar(-1e-9).is_err());
        assert!(min_jerk_scalar(1.0 + 1e-9).is_err());
        assert!(min_jerk_scalar(f64::NAN).is_err());
    }

    #[test]
    fn min_jerk_midpoint_velocity_by_finite_differences() {
        let v = central_diff(|t| min_jerk_scalar(t).unwrap(), 0.5, 1e-6);
        assert!((v - 1.875).abs() < 1e-8, "{v}");
    }

    #[test]
    fn segment_endpoints_are_exact() {
        let start = Pose::from_translation(0.1, 0.2, 0.3);
        let goal = Pose::new(
            Vector3::new(0.4, -0.1, 0.2),
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.0),
        );
        let seg = TrajectorySegment::new(start, goal, 2.0, 5.0).unwrap();
        assert_eq!(seg.pose_at(5.0).unwrap(), start);
        assert_eq!(seg.pose_at(7.0).unwrap(), goal);
        assert!(seg.pose_at(4.999).is_err());
        assert!(seg.pose_at(7.001).is_err());
    }

    #[test]
    fn zero_duration_rejected() {
        let p = Pose::identity();
        assert!(TrajectorySegment::new(p, p, 0.0, 0.0).is_err());
    }

    #[test]
    fn slerp_takes_the_short_way_for_antipodal_goal() {
        let start = UnitQuaternion::identity();
        let rot = UnitQuaternion::from_euler_angles(0.0, 0.0, PI / 2.0);
        let flipped = UnitQuaternion::new_unchecked(-rot.into_inner());
        let mid = slerp_shortest(&start, &flipped, 0.5);
        assert!((mid.angle() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn half_turn_interpolation_is_well_defined() {
        let start = UnitQuaternion::identity();
        let goal = UnitQuaternion::from_euler_angles(PI, 0.0, 0.0);
        let mid = slerp_shortest(&start, &goal, 0.5);
        assert!((mid.angle() - PI / 2.0).abs() < 1e-12);
        assert!((mid.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cruise_duration_has_floor() {
        let a = Pose::from_translation(0.0, 0.0, 0.0);
        let b = Pose::from_translation(0.0, 0.0, 0.01);
        assert_eq!(cruise_duration(&a, &b, 0.25, 0.5), 0.5);
        let c = Pose::from_translation(0.5, 0.0, 0.0);
        assert!((cruise_duration(&a, &c, 0.25, 0.5) - 2.0).abs() < 1e-12);
    }
}
