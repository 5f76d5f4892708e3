//! Instruction-driven manipulation: a behaviour-tree task controller over a
//! kinematic brick-world simulator, with user commands, observations and
//! recorded skills kept in a time-stamped property graph.
//!
//! Shared types are re-exported at the crate root.

pub mod bt;
pub mod command;
pub mod controller;
pub mod kg;
pub mod sim;
pub mod skills;

pub use bt::{Blackboard, BoardValue, BtError, TickStatus, Tree};
pub use command::{execute, parse, Command, CommandError, Response, Value};
pub use controller::{OutcomeStatus, Session, StreamMessage, TaskOutcome, TaskRequest, TaskSummary};
pub use kg::{AttrValue, Attributes, ElementId, EventRecord, KgError, KnowledgeGraph, Timestamp};
pub use sim::{Brick, Pose, Scene, World, WorldFrame};
pub use skills::{BaseSkillKind, TaskStep};
