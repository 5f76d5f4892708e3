//! Deterministic kinematic pick-and-place world.
//!
//! The end effector is a free body that follows minimum-jerk segments; there is
//! no joint model. Grasping is a distance/dwell-time latch: a held brick is
//! rigidly attached to the tip until released, and stays exactly where it was
//! at release time.

mod latch;
mod scene;
mod trajectory;

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::AttrValue;

pub use latch::{secs_to_nanos, GripperLatch, LatchEvent, LatchParams, Nanos};
pub use scene::{
    euler_xyz_deg, Bounds, Brick, ControllerParams, Scene, SimParams, SizeClass, SHORT_ROW_X,
    TALL_ROW_X,
};
pub use trajectory::{cruise_duration, min_jerk_scalar, slerp_shortest, Pose, TrajectorySegment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quaternion {0:?} cannot be normalized")]
    InvalidQuaternion([f64; 4]),
    #[error("scene parse error: {0}")]
    SceneParse(String),
    #[error("scene field `{field}`: {message}")]
    SceneInvalid { field: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub tip: Pose,
    pub gripper_on: bool,
    pub latch: GripperLatch,
    pub held: Option<String>,
    /// Tip-to-object transform, fixed while the joint is engaged.
    pub held_transform: Option<Pose>,
}

/// Min over mesh points (in world) of the distance to the tip position.
pub fn nearest_surface_distance(tip: &Pose, brick: &Brick) -> f64 {
    brick
        .world_mesh()
        .map(|p| (p - tip.translation).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Affordance with the greatest world z; ties go to the lowest index.
pub fn top_affordance(brick: &Brick) -> Vector3<f64> {
    let mut best: Option<Vector3<f64>> = None;
    for a in &brick.affordances {
        let w = brick.pose.transform_point(a);
        if best.is_none_or(|b| w.z > b.z) {
            best = Some(w);
        }
    }
    best.expect("bricks have at least one affordance")
}

/// Snapshot of one entity's state, keyed like the knowledge-graph attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedState {
    pub subject: String,
    pub state: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFrame {
    pub translation: [f64; 3],
    /// `[x, y, z, w]`.
    pub orientation: [f64; 4],
}

impl From<&Pose> for PoseFrame {
    fn from(p: &Pose) -> Self {
        Self {
            translation: p.translation.into(),
            orientation: p.orientation_xyzw(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFrame {
    pub tip: PoseFrame,
    pub gripper_on: bool,
    pub latch: String,
    pub held: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrickFrame {
    pub name: String,
    pub color: String,
    pub size_class: SizeClass,
    pub pose: PoseFrame,
}

/// World state as served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldFrame {
    pub robot: RobotFrame,
    pub bricks: Vec<BrickFrame>,
    /// Sim time, milliseconds.
    pub ts: u64,
}

#[derive(Debug, Clone)]
pub struct World {
    scene: Scene,
    bricks: Vec<Brick>,
    robot: RobotState,
    now: Nanos,
    segment: Option<TrajectorySegment>,
}

impl World {
    pub fn new(scene: Scene) -> Self {
        let robot = RobotState {
            tip: scene.initial_tip,
            gripper_on: false,
            latch: GripperLatch::Free,
            held: None,
            held_transform: None,
        };
        Self {
            bricks: scene.bricks.clone(),
            scene,
            robot,
            now: 0,
            segment: None,
        }
    }

    /// Restores the initial scene without rewinding the clock.
    pub fn reset(&mut self) {
        let now = self.now;
        *self = World::new(self.scene.clone());
        self.now = now;
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn bricks(&self) -> &[Brick] {
        &self.bricks
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn tip(&self) -> &Pose {
        &self.robot.tip
    }

    pub fn now(&self) -> Nanos {
        self.now
    }

    pub fn now_secs(&self) -> f64 {
        self.now as f64 * 1e-9
    }

    pub fn now_millis(&self) -> u64 {
        self.now / 1_000_000
    }

    pub fn active_segment(&self) -> Option<&TrajectorySegment> {
        self.segment.as_ref()
    }

    pub fn is_moving(&self) -> bool {
        self.segment.is_some()
    }

    /// Resolves an object reference: exact brick name first, then the first
    /// brick (in scene order) with that colour.
    pub fn resolve(&self, object_ref: &str) -> Option<usize> {
        self.bricks
            .iter()
            .position(|b| b.name == object_ref)
            .or_else(|| self.bricks.iter().position(|b| b.color == object_ref))
    }

    pub fn brick(&self, object_ref: &str) -> Option<&Brick> {
        self.resolve(object_ref).map(|i| &self.bricks[i])
    }

    /// Moves a brick directly (scene setup and tests). Ignored while it is held.
    pub fn place_brick(&mut self, object_ref: &str, pose: Pose) -> bool {
        match self.resolve(object_ref) {
            Some(i) if self.robot.held.as_deref() != Some(self.bricks[i].name.as_str()) => {
                self.bricks[i].pose = pose;
                true
            }
            _ => false,
        }
    }

    pub fn set_gripper(&mut self, on: bool) {
        self.robot.gripper_on = on;
    }

    pub fn in_workspace(&self, p: &Vector3<f64>) -> bool {
        self.scene.table.contains(p)
    }

    /// Default duration for a move from the current tip to `goal`.
    pub fn default_duration(&self, goal: &Pose) -> f64 {
        cruise_duration(
            &self.robot.tip,
            goal,
            self.scene.sim.cruise_speed,
            self.scene.sim.min_segment_duration,
        )
    }

    /// Installs a segment from the current tip to `goal`, starting now.
    pub fn start_motion(&mut self, goal: Pose, duration: Option<f64>) -> Result<(), SimError> {
        let duration = duration.unwrap_or_else(|| self.default_duration(&goal));
        self.segment = Some(TrajectorySegment::new(
            self.robot.tip,
            goal,
            duration,
            self.now_secs(),
        )?);
        Ok(())
    }

    /// Stops at the current pose.
    pub fn cancel_motion(&mut self) {
        self.segment = None;
    }

    /// Distance from the tip to the nearest brick surface and that brick's index.
    pub fn nearest_brick(&self) -> Option<(usize, f64)> {
        self.bricks
            .iter()
            .enumerate()
            .map(|(i, b)| (i, nearest_surface_distance(&self.robot.tip, b)))
            .fold(None, |best, (i, d)| match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((i, d)),
            })
    }

    pub fn step(&mut self, dt: f64) -> Result<Option<LatchEvent>, SimError> {
        if !(dt > 0.0 && dt <= 0.05) {
            return Err(SimError::Domain(format!("dt must be in (0, 0.05], got {dt}")));
        }
        self.now += secs_to_nanos(dt);
        let t = self.now_secs();

        if let Some(seg) = self.segment {
            if t >= seg.end_time() {
                self.robot.tip = seg.goal;
                self.segment = None;
            } else {
                self.robot.tip = seg.pose_at(t.max(seg.t0))?;
            }
        }

        let (nearest, distance) = self
            .nearest_brick()
            .map_or((None, f64::INFINITY), |(i, d)| (Some(i), d));
        let event = self.robot.latch.update(
            self.now,
            self.robot.gripper_on,
            distance,
            &self.scene.latch,
        );
        match event {
            Some(LatchEvent::Locked) => {
                let i = nearest.expect("locking requires a nearby brick");
                self.robot.held = Some(self.bricks[i].name.clone());
                self.robot.held_transform = Some(self.robot.tip.inverse().compose(&self.bricks[i].pose));
            }
            Some(LatchEvent::Released) => {
                self.robot.held = None;
                self.robot.held_transform = None;
            }
            _ => {}
        }

        if let (Some(name), Some(rel)) = (&self.robot.held, self.robot.held_transform) {
            let tip = self.robot.tip;
            if let Some(b) = self.bricks.iter_mut().find(|b| &b.name == name) {
                b.pose = tip.compose(&rel);
            }
        }
        Ok(event)
    }

    pub fn frame(&self) -> WorldFrame {
        WorldFrame {
            robot: RobotFrame {
                tip: (&self.robot.tip).into(),
                gripper_on: self.robot.gripper_on,
                latch: self.robot.latch.name().into(),
                held: self.robot.held.clone(),
            },
            bricks: self
                .bricks
                .iter()
                .map(|b| BrickFrame {
                    name: b.name.clone(),
                    color: b.color.clone(),
                    size_class: b.size_class,
                    pose: (&b.pose).into(),
                })
                .collect(),
            ts: self.now_millis(),
        }
    }

    /// One state record per entity: the robot first, then bricks in scene order.
    pub fn observe(&self) -> Vec<ObservedState> {
        let mut out = Vec::with_capacity(self.bricks.len() + 1);
        let mut robot = BTreeMap::new();
        robot.insert("tip_translation".into(), AttrValue::Nums(self.robot.tip.translation.as_slice().to_vec()));
        robot.insert("tip_orientation".into(), AttrValue::Nums(self.robot.tip.orientation_xyzw().to_vec()));
        robot.insert("gripper_on".into(), AttrValue::Num(if self.robot.gripper_on { 1.0 } else { 0.0 }));
        robot.insert("latch".into(), AttrValue::Str(self.robot.latch.name().into()));
        if let Some(held) = &self.robot.held {
            robot.insert("held".into(), AttrValue::Str(held.clone()));
        }
        out.push(ObservedState {
            subject: self.scene.robot_name.clone(),
            state: robot,
        });
        for b in &self.bricks {
            let mut state = BTreeMap::new();
            state.insert("translation".into(), AttrValue::Nums(b.pose.translation.as_slice().to_vec()));
            state.insert("orientation".into(), AttrValue::Nums(b.pose.orientation_xyzw().to_vec()));
            out.push(ObservedState {
                subject: b.name.clone(),
                state,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use std::f64::consts::PI;

    fn table_one_brick() -> Brick {
        let mut b = Brick::cuboid(
            "brick1",
            "red",
            SizeClass::Tall,
            Vector3::new(0.04, 0.04, 0.10),
            Pose::identity(),
        );
        b.affordances = vec![
            Vector3::new(0.0, 0.0, 0.05),
            Vector3::new(0.0, 0.0, -0.05),
            Vector3::new(0.02, 0.02, 0.0),
        ];
        b
    }

    #[test]
    fn distance_to_coincident_mesh_point_is_zero() {
        let b = table_one_brick();
        let tip = Pose::new(b.mesh[3], UnitQuaternion::identity());
        assert_eq!(nearest_surface_distance(&tip, &b), 0.0);
    }

    #[test]
    fn distance_above_corner() {
        let b = table_one_brick();
        let tip = Pose::from_translation(0.02, 0.02, 0.06);
        assert!((nearest_surface_distance(&tip, &b) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn top_affordance_at_identity() {
        let b = table_one_brick();
        assert_eq!(top_affordance(&b), Vector3::new(0.0, 0.0, 0.05));
    }

    #[test]
    fn top_affordance_flips_with_brick() {
        let mut b = table_one_brick();
        b.pose = Pose::new(Vector3::zeros(), UnitQuaternion::from_euler_angles(PI, 0.0, 0.0));
        let top = top_affordance(&b);
        let expected = b.pose.transform_point(&Vector3::new(0.0, 0.0, -0.05));
        assert!((top - expected).norm() < 1e-12);
    }

    #[test]
    fn top_affordance_single_point_and_ties() {
        let mut b = table_one_brick();
        b.affordances = vec![Vector3::new(0.01, 0.0, 0.0)];
        assert_eq!(top_affordance(&b), Vector3::new(0.01, 0.0, 0.0));
        b.affordances = vec![Vector3::new(0.01, 0.0, 0.0), Vector3::new(-0.01, 0.0, 0.0)];
        assert_eq!(top_affordance(&b), Vector3::new(0.01, 0.0, 0.0));
    }

    #[test]
    fn step_rejects_bad_dt() {
        let mut w = World::new(Scene::default());
        assert!(w.step(0.0).is_err());
        assert!(w.step(0.051).is_err());
        assert!(w.step(0.05).is_ok());
    }

    #[test]
    fn initial_observation_has_robot_and_six_bricks() {
        let w = World::new(Scene::default());
        let obs = w.observe();
        assert_eq!(obs.len(), 7);
        assert_eq!(obs[0].subject, "Panda");
        assert_eq!(w.observe(), obs);
    }

    #[test]
    fn resolve_prefers_name_then_first_colour() {
        let w = World::new(Scene::default());
        assert_eq!(w.brick("red").unwrap().name, "red_tall");
        assert_eq!(w.brick("red_short").unwrap().name, "red_short");
        assert!(w.brick("purple").is_none());
    }

    #[test]
    fn motion_reaches_goal_and_stops() {
        let mut w = World::new(Scene::default());
        let goal = Pose::from_translation(0.5, 0.1, 0.2);
        w.start_motion(goal, Some(0.3)).unwrap();
        for _ in 0..29 {
            w.step(0.01).unwrap();
            assert!(w.is_moving());
        }
        w.step(0.01).unwrap();
        assert!(!w.is_moving());
        assert_eq!(*w.tip(), goal);
    }

    fn grasp_red(w: &mut World) {
        let top = top_affordance(w.brick("red").unwrap());
        w.start_motion(Pose::new(top, UnitQuaternion::identity()), None).unwrap();
        while w.is_moving() {
            w.step(0.01).unwrap();
        }
        w.set_gripper(true);
        for _ in 0..60 {
            w.step(0.01).unwrap();
        }
    }

    #[test]
    fn grasped_brick_follows_tip_and_stays_after_release() {
        let mut w = World::new(Scene::default());
        grasp_red(&mut w);
        assert_eq!(w.robot().latch, GripperLatch::Locked);
        assert_eq!(w.robot().held.as_deref(), Some("red_tall"));
        let rel = w.robot().held_transform.unwrap();

        let goal = Pose::from_translation(0.6, -0.1, 0.25);
        w.start_motion(goal, None).unwrap();
        while w.is_moving() {
            w.step(0.01).unwrap();
            assert_eq!(w.robot().held_transform, Some(rel));
        }
        let brick = w.brick("red").unwrap().pose;
        assert!((brick.translation - Vector3::new(0.6, -0.1, 0.2)).norm() < 1e-12);

        w.set_gripper(false);
        let mut released_at = None;
        for _ in 0..60 {
            if w.step(0.01).unwrap() == Some(LatchEvent::Released) {
                released_at = Some(w.brick("red").unwrap().pose);
            }
        }
        assert_eq!(w.robot().latch, GripperLatch::Free);
        assert_eq!(w.robot().held, None);
        w.start_motion(Pose::from_translation(0.4, 0.0, 0.3), None).unwrap();
        while w.is_moving() {
            w.step(0.01).unwrap();
        }
        assert_eq!(Some(w.brick("red").unwrap().pose), released_at);
    }

    #[test]
    fn observation_after_grasp_reports_held() {
        let mut w = World::new(Scene::default());
        grasp_red(&mut w);
        let obs = w.observe();
        assert_eq!(obs[0].state.get("held"), Some(&AttrValue::Str("red_tall".into())));
    }
}
