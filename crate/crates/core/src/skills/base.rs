//! Base skills wrapped as `Fallback(Post, Sequence(Pre, Controller))`.
//!
//! Conditions only read the blackboard. The [`Plant`] publishes the world
//! state onto the board before every tick, and setting up a step writes that
//! step's controller data (resolved goal, gripper command, perception target)
//! under the keys in [`keys`].

use std::any::Any;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use super::{keypoint_key, BaseSkillKind, MoveTarget, SkillHost, StepData, TaskKind, TaskStep, WaitFor};
use crate::bt::{Action, BoardValue, Blackboard, BtError, NodeId, TickStatus, Tree};
use crate::sim::{top_affordance, Pose, World};

/// MOVE succeeds once the tip is at rest this close to the goal (metres)...
pub const POSITION_TOLERANCE: f64 = 1e-3;
/// ...and within this many degrees of the goal orientation.
pub const ORIENTATION_TOLERANCE_DEG: f64 = 0.5;

pub mod keys {
    pub const TIP_TRANSLATION: &str = "tip.translation";
    pub const TIP_ORIENTATION: &str = "tip.orientation";
    pub const GRIPPER_ON: &str = "gripper.on";
    pub const LATCH: &str = "gripper.latch";
    pub const HOLDING: &str = "gripper.holding";
    pub const MOVING: &str = "tip.moving";
    pub const OBJECTS: &str = "scene.objects";
    pub const WORKSPACE: &str = "scene.workspace";
    pub const TIME: &str = "sim.time";

    pub const MOVE_SETUP: &str = "move.setup";
    pub const MOVE_GOAL_TRANSLATION: &str = "move.goal.translation";
    pub const MOVE_GOAL_ORIENTATION: &str = "move.goal.orientation";
    pub const MOVE_DURATION: &str = "move.duration";
    pub const MOVE_REQUIRES_HOLDING: &str = "move.requires_holding";

    pub const GRIPPER_SETUP: &str = "gripper.setup";
    pub const GRIPPER_COMMAND: &str = "gripper.command";
    pub const GRIPPER_WAIT: &str = "gripper.wait";

    pub const PERCEPTION_SETUP: &str = "perception.setup";
    pub const PERCEPTION_OBJECT: &str = "perception.object";
    pub const PERCEPTION_STORE_KEY: &str = "perception.store_key";
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetupError {
    #[error("task kind `{0}` is not a base skill")]
    UnknownKind(String),
    #[error("step data does not match its kind")]
    Malformed,
    #[error("no keypoint for `{0}`; perceive it first")]
    MissingKeypoint(String),
}

/// The controlled system: the simulated world plus bookkeeping the tests and
/// controller inspect.
#[derive(Debug, Clone)]
pub struct Plant {
    pub world: World,
    /// Seconds a waiting gripper step may take.
    pub gripper_timeout: f64,
    /// Base skills set up so far, in order.
    pub invocations: Vec<BaseSkillKind>,
    /// How often each base skill's controller was entered (chooser order).
    pub controller_entries: [usize; 3],
    /// Why the most recent [`SkillHost::set_up_task`] call was refused.
    pub last_setup_error: Option<SetupError>,
    setups: u64,
}

fn vec_value(v: &Vector3<f64>) -> BoardValue {
    BoardValue::Vector(v.as_slice().to_vec())
}

fn quat_value(q: &UnitQuaternion<f64>) -> BoardValue {
    let q = q.quaternion();
    BoardValue::Vector(vec![q.i, q.j, q.k, q.w])
}

fn read_vec3(board: &Blackboard, key: &str) -> Result<Vector3<f64>, BtError> {
    let v = board.get_vector(key)?;
    match v[..] {
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(BtError::Leaf(format!("`{key}` is not a 3-vector"))),
    }
}

fn read_quat(board: &Blackboard, key: &str) -> Result<UnitQuaternion<f64>, BtError> {
    let v = board.get_vector(key)?;
    match v[..] {
        [x, y, z, w] => Ok(UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))),
        _ => Err(BtError::Leaf(format!("`{key}` is not a quaternion"))),
    }
}

fn setup_key(kind: BaseSkillKind) -> &'static str {
    match kind {
        BaseSkillKind::Move => keys::MOVE_SETUP,
        BaseSkillKind::Gripper => keys::GRIPPER_SETUP,
        BaseSkillKind::Perception => keys::PERCEPTION_SETUP,
    }
}

impl Plant {
    pub fn new(world: World) -> Self {
        let gripper_timeout = world.scene().controller.gripper_timeout;
        Self {
            world,
            gripper_timeout,
            invocations: Vec::new(),
            controller_entries: [0; 3],
            last_setup_error: None,
            setups: 0,
        }
    }

    /// Steps the world through one control period in `dt` substeps.
    pub fn advance(&mut self, period: f64) {
        let dt = self.world.scene().sim.dt;
        let substeps = ((period / dt).round() as usize).max(1);
        for _ in 0..substeps {
            self.world.step(dt).expect("scene dt validated");
        }
    }

    /// Writes the current world state onto the board.
    pub fn publish(&self, board: &mut Blackboard) {
        let robot = self.world.robot();
        board.set(keys::TIP_TRANSLATION, vec_value(&robot.tip.translation));
        board.set(keys::TIP_ORIENTATION, quat_value(&robot.tip.orientation));
        board.set(keys::GRIPPER_ON, BoardValue::Bool(robot.gripper_on));
        board.set(keys::LATCH, BoardValue::Text(robot.latch.name().into()));
        board.set(keys::HOLDING, BoardValue::Bool(robot.held.is_some()));
        board.set(keys::MOVING, BoardValue::Bool(self.world.is_moving()));
        let mut objects: Vec<String> = Vec::new();
        for b in self.world.bricks() {
            for r in [&b.name, &b.color] {
                if !objects.contains(r) {
                    objects.push(r.clone());
                }
            }
        }
        board.set(keys::OBJECTS, BoardValue::ObjectRefs(objects));
        board.set(keys::WORKSPACE, BoardValue::Vector(self.world.scene().table.as_vec()));
        board.set(keys::TIME, BoardValue::Number(self.world.now_secs()));
    }

    /// Resolves `step` against the board and world and writes its controller
    /// data. Logs the invocation.
    pub fn set_up(&mut self, step: &TaskStep, board: &mut Blackboard) -> Result<BaseSkillKind, SetupError> {
        let kind = match &step.kind {
            TaskKind::Base(k) => *k,
            TaskKind::Other(label) => return Err(SetupError::UnknownKind(label.clone())),
        };
        if !step.is_well_formed() {
            return Err(SetupError::Malformed);
        }
        match &step.data {
            StepData::Move(m) => {
                let (goal, requires_holding) = self.resolve_goal(&m.target, board)?;
                board.set(keys::MOVE_GOAL_TRANSLATION, vec_value(&goal.translation));
                board.set(keys::MOVE_GOAL_ORIENTATION, quat_value(&goal.orientation));
                board.set(keys::MOVE_REQUIRES_HOLDING, BoardValue::Bool(requires_holding));
                match m.duration {
                    Some(d) => board.set(keys::MOVE_DURATION, BoardValue::Number(d)),
                    None => {
                        board.remove(keys::MOVE_DURATION);
                    }
                }
            }
            StepData::Gripper(g) => {
                board.set(keys::GRIPPER_COMMAND, BoardValue::Bool(g.on));
                let wait = match g.wait_for {
                    None => "none",
                    Some(WaitFor::Locked) => "Locked",
                    Some(WaitFor::Free) => "Free",
                };
                board.set(keys::GRIPPER_WAIT, BoardValue::Text(wait.into()));
            }
            StepData::Perception(p) => {
                board.set(keys::PERCEPTION_OBJECT, BoardValue::ObjectRef(p.object_ref.clone()));
                board.set(keys::PERCEPTION_STORE_KEY, BoardValue::Text(p.store_key.clone()));
                board.remove(&p.store_key);
            }
            StepData::Opaque(_) => unreachable!("well-formed base step"),
        }
        self.setups += 1;
        board.set(setup_key(kind), BoardValue::Number(self.setups as f64));
        self.invocations.push(kind);
        Ok(kind)
    }

    fn resolve_goal(&self, target: &MoveTarget, board: &Blackboard) -> Result<(Pose, bool), SetupError> {
        let tip = *self.world.tip();
        Ok(match target {
            MoveTarget::Absolute { translation, orientation } => (Pose::new(*translation, *orientation), false),
            MoveTarget::Anchored {
                object_ref,
                offset,
                orientation,
            } => {
                let anchor = read_vec3(board, &keypoint_key(object_ref))
                    .map_err(|_| SetupError::MissingKeypoint(object_ref.clone()))?;
                (
                    Pose::new(anchor + offset, orientation.unwrap_or_else(UnitQuaternion::identity)),
                    false,
                )
            }
            MoveTarget::Relative { delta, orientation } => (
                Pose::new(tip.translation + delta, orientation.unwrap_or(tip.orientation)),
                false,
            ),
            MoveTarget::Place { clearance, orientation } => {
                let orientation = orientation.unwrap_or(tip.orientation);
                let robot = self.world.robot();
                let held = robot.held.as_deref().and_then(|n| self.world.brick(n));
                let z = match (held, robot.held_transform) {
                    (Some(brick), Some(rel)) => {
                        // Lowest mesh point relative to the tip once re-oriented.
                        let lowest = brick
                            .mesh
                            .iter()
                            .map(|p| (orientation * rel.transform_point(p)).z)
                            .fold(f64::INFINITY, f64::min);
                        clearance - lowest
                    }
                    _ => *clearance,
                };
                (
                    Pose::new(Vector3::new(tip.translation.x, tip.translation.y, z), orientation),
                    true,
                )
            }
        })
    }
}

impl SkillHost for Plant {
    fn set_up_task(&mut self, step: &TaskStep, board: &mut Blackboard) -> bool {
        match self.set_up(step, board) {
            Ok(_) => {
                self.last_setup_error = None;
                true
            }
            Err(e) => {
                self.last_setup_error = Some(e);
                false
            }
        }
    }
}

fn move_post(board: &Blackboard) -> Result<bool, BtError> {
    let goal = read_vec3(board, keys::MOVE_GOAL_TRANSLATION)?;
    let tip = read_vec3(board, keys::TIP_TRANSLATION)?;
    let angle = read_quat(board, keys::MOVE_GOAL_ORIENTATION)?.angle_to(&read_quat(board, keys::TIP_ORIENTATION)?);
    Ok(!board.get_bool(keys::MOVING)?
        && (goal - tip).norm() < POSITION_TOLERANCE
        && angle.to_degrees() < ORIENTATION_TOLERANCE_DEG)
}

fn goal_in_workspace(board: &Blackboard) -> Result<bool, BtError> {
    let goal = read_vec3(board, keys::MOVE_GOAL_TRANSLATION)?;
    let ws = board.get_vector(keys::WORKSPACE)?;
    let [x0, x1, y0, y1, z0, z1] = ws[..] else {
        return Err(BtError::Leaf("workspace must have 6 bounds".into()));
    };
    Ok((x0..=x1).contains(&goal.x) && (y0..=y1).contains(&goal.y) && (z0..=z1).contains(&goal.z))
}

fn move_pre(board: &Blackboard) -> Result<bool, BtError> {
    let holding_ok = !board.get_bool(keys::MOVE_REQUIRES_HOLDING)? || board.get_bool(keys::HOLDING)?;
    Ok(holding_ok && goal_in_workspace(board)?)
}

fn gripper_post(board: &Blackboard) -> Result<bool, BtError> {
    if board.get_bool(keys::GRIPPER_ON)? != board.get_bool(keys::GRIPPER_COMMAND)? {
        return Ok(false);
    }
    let wait = board.get_text(keys::GRIPPER_WAIT)?;
    Ok(wait == "none" || board.get_text(keys::LATCH)? == wait)
}

fn perception_post(board: &Blackboard) -> Result<bool, BtError> {
    Ok(board.contains(&board.get_text(keys::PERCEPTION_STORE_KEY)?))
}

fn perception_pre(board: &Blackboard) -> Result<bool, BtError> {
    let object = board.get_object_ref(keys::PERCEPTION_OBJECT)?;
    Ok(board.get_object_refs(keys::OBJECTS)?.contains(&object))
}

/// Tracks the set-up generation so a controller notices it was re-targeted.
#[derive(Debug, Default)]
struct Generation(Option<u64>);

impl Generation {
    /// True the first time a new set-up is seen.
    fn fresh(&mut self, board: &Blackboard, key: &str) -> Result<bool, BtError> {
        let current = board.get_number(key)? as u64;
        let fresh = self.0 != Some(current);
        self.0 = Some(current);
        Ok(fresh)
    }
}

#[derive(Debug, Default)]
struct MoveController {
    generation: Generation,
}

impl Action<Plant> for MoveController {
    fn tick(&mut self, board: &mut Blackboard, plant: &mut Plant) -> Result<TickStatus, BtError> {
        let fresh = self.generation.fresh(board, keys::MOVE_SETUP)?;
        if fresh || !plant.world.is_moving() {
            let goal = Pose::new(
                read_vec3(board, keys::MOVE_GOAL_TRANSLATION)?,
                read_quat(board, keys::MOVE_GOAL_ORIENTATION)?,
            );
            let duration = board.get_number(keys::MOVE_DURATION).ok();
            plant
                .world
                .start_motion(goal, duration)
                .map_err(|e| BtError::Leaf(e.to_string()))?;
            if fresh {
                plant.controller_entries[BaseSkillKind::Move.index()] += 1;
            }
        }
        Ok(TickStatus::Running)
    }

    fn reset(&mut self) {
        self.generation = Generation::default();
    }

    fn as_any_mut(&mut self) -> Option<&mut dyn Any> {
        Some(self)
    }
}

#[derive(Debug, Default)]
struct GripperController {
    generation: Generation,
    started: f64,
}

impl Action<Plant> for GripperController {
    fn tick(&mut self, board: &mut Blackboard, plant: &mut Plant) -> Result<TickStatus, BtError> {
        if self.generation.fresh(board, keys::GRIPPER_SETUP)? {
            plant.world.set_gripper(board.get_bool(keys::GRIPPER_COMMAND)?);
            self.started = plant.world.now_secs();
            plant.controller_entries[BaseSkillKind::Gripper.index()] += 1;
            return Ok(TickStatus::Running);
        }
        if plant.world.now_secs() - self.started > plant.gripper_timeout {
            return Ok(TickStatus::Failure);
        }
        Ok(TickStatus::Running)
    }

    fn reset(&mut self) {
        *self = Self::default();
    }

    fn as_any_mut(&mut self) -> Option<&mut dyn Any> {
        Some(self)
    }
}

#[derive(Debug, Default)]
struct PerceptionController;

impl Action<Plant> for PerceptionController {
    fn tick(&mut self, board: &mut Blackboard, plant: &mut Plant) -> Result<TickStatus, BtError> {
        plant.controller_entries[BaseSkillKind::Perception.index()] += 1;
        let object = board.get_object_ref(keys::PERCEPTION_OBJECT)?;
        let key = board.get_text(keys::PERCEPTION_STORE_KEY)?;
        let Some(brick) = plant.world.brick(&object) else {
            return Ok(TickStatus::Failure);
        };
        board.set(key, vec_value(&top_affordance(brick)));
        Ok(TickStatus::Success)
    }
}

/// Adds `Fallback(Post, Sequence(Pre, Controller))` for `kind` and returns its root.
pub fn build_base_skill(tree: &mut Tree<Plant>, kind: BaseSkillKind) -> NodeId {
    let label = kind.label();
    let (post, pre, controller) = match kind {
        BaseSkillKind::Move => (
            tree.condition(&format!("{label} post"), move_post),
            tree.condition(&format!("{label} pre"), move_pre),
            tree.action(&format!("{label} controller"), MoveController::default()),
        ),
        BaseSkillKind::Gripper => (
            tree.condition(&format!("{label} post"), gripper_post),
            tree.condition(&format!("{label} pre"), |_| Ok(true)),
            tree.action(&format!("{label} controller"), GripperController::default()),
        ),
        BaseSkillKind::Perception => (
            tree.condition(&format!("{label} post"), perception_post),
            tree.condition(&format!("{label} pre"), perception_pre),
            tree.action(&format!("{label} controller"), PerceptionController),
        ),
    };
    let run = tree.sequence(&format!("{label} run"), vec![pre, controller]);
    tree.fallback(label, vec![post, run])
}

/// Human-readable reason a base skill failed, from the board and world.
pub fn failure_cause(kind: BaseSkillKind, board: &Blackboard, world: &World) -> String {
    match kind {
        BaseSkillKind::Move => {
            if board.get_bool(keys::MOVE_REQUIRES_HOLDING).unwrap_or(false) && world.robot().held.is_none() {
                return "MOVE: placing requires a held object".into();
            }
            match read_vec3(board, keys::MOVE_GOAL_TRANSLATION) {
                Ok(goal) if !world.in_workspace(&goal) => format!(
                    "MOVE: goal [{:.3}, {:.3}, {:.3}] is outside the workspace",
                    goal.x, goal.y, goal.z
                ),
                _ => "MOVE: controller failed".into(),
            }
        }
        BaseSkillKind::Gripper => format!(
            "GRIPPER: timed out waiting for latch {} (latch is {})",
            board.get_text(keys::GRIPPER_WAIT).unwrap_or_default(),
            world.robot().latch.name()
        ),
        BaseSkillKind::Perception => format!(
            "PERCEPTION: unknown object '{}'",
            board.get_object_ref(keys::PERCEPTION_OBJECT).unwrap_or_default()
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SequentialOutcome {
    Succeeded,
    Failed { step: usize, cause: String },
}

/// Executes steps one after another without the chooser machinery: one
/// control cycle to set a step up, then one tick of that base skill per
/// cycle until it settles. Reference path for checking the main tree.
pub struct SequentialRunner {
    pub plant: Plant,
    pub board: Blackboard,
    skills: Vec<(Tree<Plant>, BaseSkillKind)>,
    period: f64,
}

impl SequentialRunner {
    pub fn new(world: World) -> Self {
        let period = world.scene().tick_period();
        let plant = Plant::new(world);
        let mut board = Blackboard::new(BaseSkillKind::ALL.len());
        plant.publish(&mut board);
        let skills = BaseSkillKind::ALL
            .into_iter()
            .map(|kind| {
                let mut tree = Tree::new();
                let root = build_base_skill(&mut tree, kind);
                tree.set_root(root);
                (tree, kind)
            })
            .collect();
        Self {
            plant,
            board,
            skills,
            period,
        }
    }

    fn cycle(&mut self) {
        self.plant.advance(self.period);
        self.plant.publish(&mut self.board);
    }

    pub fn run(&mut self, steps: &[TaskStep], max_cycles_per_step: usize) -> SequentialOutcome {
        for (i, step) in steps.iter().enumerate() {
            self.cycle();
            let kind = match self.plant.set_up(step, &mut self.board) {
                Ok(kind) => kind,
                Err(e) => {
                    return SequentialOutcome::Failed {
                        step: i,
                        cause: e.to_string(),
                    }
                }
            };
            let tree = &mut self.skills[kind.index()].0;
            tree.reset_all();
            let mut settled = false;
            for _ in 0..max_cycles_per_step {
                self.plant.advance(self.period);
                self.plant.publish(&mut self.board);
                match tree.tick(&mut self.board, &mut self.plant) {
                    Ok(TickStatus::Success) => {
                        settled = true;
                        break;
                    }
                    Ok(TickStatus::Running) => {}
                    Ok(TickStatus::Failure) => {
                        return SequentialOutcome::Failed {
                            step: i,
                            cause: failure_cause(kind, &self.board, &self.plant.world),
                        }
                    }
                    Err(e) => {
                        return SequentialOutcome::Failed {
                            step: i,
                            cause: e.to_string(),
                        }
                    }
                }
            }
            if !settled {
                return SequentialOutcome::Failed {
                    step: i,
                    cause: "did not settle".into(),
                };
            }
        }
        SequentialOutcome::Succeeded
    }
}
