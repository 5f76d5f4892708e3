//! Scene configuration: table, robot, bricks, latch and timing parameters.
//!
//! Scenes are TOML documents. Every section is optional and falls back to the
//! built-in default scene; see `scenes/default.toml` in the repository for the
//! full schema with comments.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::latch::{secs_to_nanos, LatchParams};
use super::trajectory::Pose;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeClass {
    Tall,
    Short,
}

impl SizeClass {
    /// Full box dimensions in metres.
    pub fn default_dimensions(self) -> Vector3<f64> {
        match self {
            SizeClass::Tall => Vector3::new(0.02, 0.02, 0.10),
            SizeClass::Short => Vector3::new(0.02, 0.02, 0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Brick {
    pub name: String,
    pub color: String,
    pub size_class: SizeClass,
    pub pose: Pose,
    /// Object frame, metres.
    pub affordances: Vec<Vector3<f64>>,
    /// Surface sample points, object frame, metres.
    pub mesh: Vec<Vector3<f64>>,
}

impl Brick {
    /// Box-shaped brick centred on its pose, with affordances at the face
    /// centres (top first) and a 26-point surface mesh.
    pub fn cuboid(name: &str, color: &str, size_class: SizeClass, dims: Vector3<f64>, pose: Pose) -> Self {
        let half = dims / 2.0;
        let affordances = vec![
            Vector3::new(0.0, 0.0, half.z),
            Vector3::new(0.0, 0.0, -half.z),
            Vector3::new(half.x, 0.0, 0.0),
            Vector3::new(-half.x, 0.0, 0.0),
            Vector3::new(0.0, half.y, 0.0),
            Vector3::new(0.0, -half.y, 0.0),
        ];
        let mut mesh = Vec::with_capacity(26);
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    if (i, j, k) != (0, 0, 0) {
                        mesh.push(Vector3::new(
                            i as f64 * half.x,
                            j as f64 * half.y,
                            k as f64 * half.z,
                        ));
                    }
                }
            }
        }
        Self {
            name: name.to_owned(),
            color: color.to_owned(),
            size_class,
            pose,
            affordances,
            mesh,
        }
    }

    pub fn world_mesh(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.mesh.iter().map(|p| self.pose.transform_point(p))
    }

    /// Lowest world z over the mesh.
    pub fn bottom_z(&self) -> f64 {
        self.world_mesh().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
}

impl Bounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let within = |v: f64, [lo, hi]: [f64; 2]| v >= lo && v <= hi;
        within(p.x, self.x) && within(p.y, self.y) && within(p.z, self.z)
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.x[0], self.x[1], self.y[0], self.y[1], self.z[0], self.z[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Integration step, seconds.
    pub dt: f64,
    /// m/s, used for default segment durations.
    pub cruise_speed: f64,
    pub min_segment_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    /// Hz.
    pub tick_rate: f64,
    /// Hz.
    pub observation_rate: f64,
    /// Seconds a waiting gripper step may run before failing.
    pub gripper_timeout: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            tick_rate: 20.0,
            observation_rate: 5.0,
            gripper_timeout: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub table: Bounds,
    pub robot_name: String,
    pub initial_tip: Pose,
    pub latch: LatchParams,
    pub sim: SimParams,
    pub controller: ControllerParams,
    pub bricks: Vec<Brick>,
}

pub const TALL_ROW_X: f64 = 0.35;
pub const SHORT_ROW_X: f64 = 0.50;
const ROW_Y: [f64; 3] = [-0.10, 0.0, 0.10];
const COLORS: [&str; 3] = ["red", "green", "blue"];

impl Default for Scene {
    /// Three tall and three short bricks in two rows along y, coloured red,
    /// green and blue in both rows.
    fn default() -> Self {
        let mut bricks = Vec::new();
        for (size, x) in [(SizeClass::Tall, TALL_ROW_X), (SizeClass::Short, SHORT_ROW_X)] {
            let dims = size.default_dimensions();
            for (color, y) in COLORS.iter().zip(ROW_Y) {
                let suffix = match size {
                    SizeClass::Tall => "tall",
                    SizeClass::Short => "short",
                };
                bricks.push(Brick::cuboid(
                    &format!("{color}_{suffix}"),
                    color,
                    size,
                    dims,
                    Pose::from_translation(x, y, dims.z / 2.0),
                ));
            }
        }
        Self {
            table: Bounds {
                x: [0.0, 1.0],
                y: [-0.5, 0.5],
                z: [0.0, 0.6],
            },
            robot_name: "Panda".into(),
            initial_tip: Pose::from_translation(0.40, 0.0, 0.30),
            latch: LatchParams::default(),
            sim: SimParams {
                dt: 0.01,
                cruise_speed: 0.25,
                min_segment_duration: 0.5,
            },
            controller: ControllerParams::default(),
            bricks,
        }
    }
}

// File schema. Every section is optional.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    table: Option<Bounds>,
    robot: Option<RobotFile>,
    latch: Option<LatchFile>,
    sim: Option<SimFile>,
    controller: Option<ControllerFile>,
    bricks: Option<Vec<BrickFile>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    name: Option<String>,
    tip_translation: Option<[f64; 3]>,
    tip_orientation: Option<[f64; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatchFile {
    distance_threshold: Option<f64>,
    grasp_time: Option<f64>,
    release_time: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    dt: Option<f64>,
    cruise_speed: Option<f64>,
    min_segment_duration: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerFile {
    tick_rate: Option<f64>,
    observation_rate: Option<f64>,
    gripper_timeout: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BrickFile {
    name: String,
    color: String,
    size_class: SizeClass,
    translation: [f64; 3],
    #[serde(default = "identity_xyzw")]
    orientation: [f64; 4],
    dimensions: Option<[f64; 3]>,
    affordances: Option<Vec<[f64; 3]>>,
    mesh: Option<Vec<[f64; 3]>>,
}

fn identity_xyzw() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> SimError {
    SimError::SceneInvalid {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64, SimError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl Scene {
    /// Parses a TOML scene document. Syntax errors carry line and column;
    /// semantic errors name the offending field.
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let file: SceneFile = toml::from_str(text).map_err(|e| SimError::SceneParse(e.to_string()))?;
        let mut scene = Scene::default();

        if let Some(table) = file.table {
            for (axis, [lo, hi]) in [("x", table.x), ("y", table.y), ("z", table.z)] {
                if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                    return Err(invalid(format!("table.{axis}"), "min must be below max"));
                }
            }
            scene.table = table;
        }
        if let Some(robot) = file.robot {
            if let Some(name) = robot.name {
                scene.robot_name = name;
            }
            let translation = robot
                .tip_translation
                .unwrap_or(scene.initial_tip.translation.into());
            let orientation = robot
                .tip_orientation
                .unwrap_or(scene.initial_tip.orientation_xyzw());
            scene.initial_tip = Pose::from_xyzw(translation, orientation)
                .map_err(|e| invalid("robot.tip_orientation", e.to_string()))?;
        }
        if let Some(latch) = file.latch {
            if let Some(d) = latch.distance_threshold {
                scene.latch.distance_threshold = positive("latch.distance_threshold", d)?;
            }
            if let Some(t) = latch.grasp_time {
                scene.latch.grasp_time = secs_to_nanos(positive("latch.grasp_time", t)?);
            }
            if let Some(t) = latch.release_time {
                scene.latch.release_time = secs_to_nanos(positive("latch.release_time", t)?);
            }
        }
        if let Some(sim) = file.sim {
            if let Some(dt) = sim.dt {
                if !(dt > 0.0 && dt <= 0.05) {
                    return Err(invalid("sim.dt", format!("must be in (0, 0.05], got {dt}")));
                }
                scene.sim.dt = dt;
            }
            if let Some(v) = sim.cruise_speed {
                scene.sim.cruise_speed = positive("sim.cruise_speed", v)?;
            }
            if let Some(v) = sim.min_segment_duration {
                scene.sim.min_segment_duration = positive("sim.min_segment_duration", v)?;
            }
        }
        if let Some(c) = file.controller {
            if let Some(v) = c.tick_rate {
                scene.controller.tick_rate = positive("controller.tick_rate", v)?;
            }
            if let Some(v) = c.observation_rate {
                scene.controller.observation_rate = positive("controller.observation_rate", v)?;
            }
            if let Some(v) = c.gripper_timeout {
                scene.controller.gripper_timeout = positive("controller.gripper_timeout", v)?;
            }
        }
        if let Some(bricks) = file.bricks {
            scene.bricks = bricks
                .into_iter()
                .enumerate()
                .map(|(i, b)| b.into_brick(i))
                .collect::<Result<_, _>>()?;
            for (i, b) in scene.bricks.iter().enumerate() {
                if scene.bricks[..i].iter().any(|o| o.name == b.name) {
                    return Err(invalid(format!("bricks[{i}].name"), format!("duplicate name `{}`", b.name)));
                }
            }
        }
        Ok(scene)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SimError::SceneParse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    /// Control period in seconds.
    pub fn tick_period(&self) -> f64 {
        1.0 / self.controller.tick_rate
    }
}

impl BrickFile {
    fn into_brick(self, index: usize) -> Result<Brick, SimError> {
        let field = |f: &str| format!("bricks[{index}].{f}");
        let pose = Pose::from_xyzw(self.translation, self.orientation)
            .map_err(|e| invalid(field("orientation"), e.to_string()))?;
        let dims = match self.dimensions {
            Some(d) => {
                for v in d {
                    positive(&field("dimensions"), v)?;
                }
                Vector3::from(d)
            }
            None => self.size_class.default_dimensions(),
        };
        let mut brick = Brick::cuboid(&self.name, &self.color, self.size_class, dims, pose);
        if let Some(aff) = self.affordances {
            if aff.is_empty() {
                return Err(invalid(field("affordances"), "must be non-empty"));
            }
            brick.affordances = aff.into_iter().map(Vector3::from).collect();
        }
        if let Some(mesh) = self.mesh {
            if mesh.is_empty() {
                return Err(invalid(field("mesh"), "must be non-empty"));
            }
            brick.mesh = mesh.into_iter().map(Vector3::from).collect();
        }
        Ok(brick)
    }
}

/// Orientation from XYZ Euler angles in degrees, applied in the world frame
/// (roll about x first, then pitch about y, then yaw about z).
pub fn euler_xyz_deg(angles: [f64; 3]) -> UnitQuaternion<f64> {
    let [r, p, y] = angles.map(f64::to_radians);
    UnitQuaternion::from_euler_angles(r, p, y)
}
