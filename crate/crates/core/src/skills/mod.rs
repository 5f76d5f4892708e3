//! Skill library: the three base skills, the derived pick-and-place skills
//! that compile to base-skill steps, and the custom-skill node that feeds
//! recorded step lists through the chooser one step at a time.

mod base;
mod compile;
mod custom;
mod step;

use thiserror::Error;

pub use base::{
    build_base_skill, failure_cause, keys, Plant, SequentialOutcome, SequentialRunner, SetupError,
    POSITION_TOLERANCE, ORIENTATION_TOLERANCE_DEG,
};
pub use compile::{compile_drop_brick, compile_move_by_object, compile_move_hand, compile_pickup_brick};
pub use custom::{CustomSkill, SkillHost};
pub use step::{
    keypoint_key, BaseSkillKind, GripperData, MoveData, MoveTarget, PerceptionData, StepData, TaskKind, TaskStep,
    WaitFor,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkillError {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("malformed step encoding: {0}")]
    StepEncoding(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkillBody {
    Base(BaseSkillKind),
    /// Compiled from command arguments at scheduling time.
    Derived,
    Composite(Vec<TaskStep>),
}

/// A named entry of the skill library.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillSpec {
    pub name: String,
    pub body: SkillBody,
    pub pre: String,
    pub post: String,
}

impl SkillSpec {
    pub fn base(kind: BaseSkillKind) -> Self {
        let (pre, post) = match kind {
            BaseSkillKind::Move => ("goal inside workspace", "tip at goal"),
            BaseSkillKind::Gripper => ("true", "gripper commanded and latch settled"),
            BaseSkillKind::Perception => ("object exists", "keypoint on board"),
        };
        Self {
            name: kind.label().to_owned(),
            body: SkillBody::Base(kind),
            pre: pre.into(),
            post: post.into(),
        }
    }

    pub fn derived(name: &str, pre: &str, post: &str) -> Self {
        Self {
            name: name.to_owned(),
            body: SkillBody::Derived,
            pre: pre.into(),
            post: post.into(),
        }
    }

    pub fn composite(name: &str, steps: Vec<TaskStep>) -> Self {
        Self {
            name: name.to_owned(),
            body: SkillBody::Composite(steps),
            pre: "true".into(),
            post: "all steps succeeded".into(),
        }
    }

    pub fn base_kind(&self) -> Option<BaseSkillKind> {
        match self.body {
            SkillBody::Base(k) => Some(k),
            _ => None,
        }
    }
}

/// Base skills plus the four derived pick-and-place skills.
pub fn default_library() -> Vec<SkillSpec> {
    let mut lib: Vec<SkillSpec> = BaseSkillKind::ALL.into_iter().map(SkillSpec::base).collect();
    lib.push(SkillSpec::derived("pickup_brick", "object exists", "holding object"));
    lib.push(SkillSpec::derived("drop_brick", "holding object", "gripper free"));
    lib.push(SkillSpec::derived("move_hand", "goal inside workspace", "tip at goal"));
    lib.push(SkillSpec::derived("move_by_object", "object exists", "tip at goal"));
    lib
}
