//! Generators and reference models shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::Rng;

use instructa::bt::{Action, Blackboard, BoardValue, BtError, NodeId, TickStatus, Tree};
use instructa::command::{Command, Value};
use instructa::kg::parse_timestamp;
use instructa::skills::{MoveTarget, TaskStep, WaitFor};
use instructa::{Session, Timestamp, World};

pub fn epoch() -> Timestamp {
    parse_timestamp("2024-Jul-12-12-00-00.000").unwrap()
}

pub fn session() -> Session {
    Session::new(instructa::Scene::default(), None, epoch()).unwrap()
}

// ---------------------------------------------------------------- BT trees

#[derive(Debug, Clone)]
pub enum Ast {
    Seq(Vec<Ast>),
    Fb(Vec<Ast>),
    /// Reads board key `c{i}`.
    Cond(usize),
    Act(TickStatus),
}

pub const CONDITION_KEYS: usize = 4;

pub fn ast_strategy() -> impl Strategy<Value = Ast> {
    let status = prop_oneof![
        Just(TickStatus::Success),
        Just(TickStatus::Failure),
        Just(TickStatus::Running)
    ];
    let leaf = prop_oneof![(0..CONDITION_KEYS).prop_map(Ast::Cond), status.prop_map(Ast::Act)];
    // five recursion levels over a leaf: depth at most 6
    leaf.prop_recursive(5, 64, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Ast::Seq),
            prop::collection::vec(inner, 1..4).prop_map(Ast::Fb),
        ]
    })
}

pub fn depth(ast: &Ast) -> usize {
    match ast {
        Ast::Seq(c) | Ast::Fb(c) => 1 + c.iter().map(depth).max().unwrap_or(0),
        _ => 1,
    }
}

struct Fixed(TickStatus);

impl Action<()> for Fixed {
    fn tick(&mut self, _: &mut Blackboard, _: &mut ()) -> Result<TickStatus, BtError> {
        Ok(self.0)
    }
}

/// Node ids of a built tree, mirroring the AST.
pub struct Built {
    pub id: NodeId,
    pub children: Vec<Built>,
}

pub fn build(tree: &mut Tree<()>, ast: &Ast) -> Built {
    match ast {
        Ast::Seq(kids) | Ast::Fb(kids) => {
            let children: Vec<Built> = kids.iter().map(|k| build(tree, k)).collect();
            let ids = children.iter().map(|c| c.id).collect();
            let id = if matches!(ast, Ast::Seq(_)) {
                tree.sequence("seq", ids)
            } else {
                tree.fallback("fb", ids)
            };
            Built { id, children }
        }
        Ast::Cond(i) => {
            let key = format!("c{i}");
            let id = tree.condition(&key.clone(), move |b: &Blackboard| b.get_bool(&key));
            Built { id, children: vec![] }
        }
        Ast::Act(s) => Built {
            id: tree.action("act", Fixed(*s)),
            children: vec![],
        },
    }
}

/// Recursive reference semantics: status plus visit order.
pub fn oracle(ast: &Ast, built: &Built, conds: &[bool], trace: &mut Vec<NodeId>) -> TickStatus {
    trace.push(built.id);
    match ast {
        Ast::Seq(kids) => {
            for (k, b) in kids.iter().zip(&built.children) {
                let s = oracle(k, b, conds, trace);
                if s != TickStatus::Success {
                    return s;
                }
            }
            TickStatus::Success
        }
        Ast::Fb(kids) => {
            for (k, b) in kids.iter().zip(&built.children) {
                let s = oracle(k, b, conds, trace);
                if s != TickStatus::Failure {
                    return s;
                }
            }
            TickStatus::Failure
        }
        Ast::Cond(i) => {
            if conds[*i] {
                TickStatus::Success
            } else {
                TickStatus::Failure
            }
        }
        Ast::Act(s) => *s,
    }
}

pub fn board_with(conds: &[bool]) -> Blackboard {
    let mut b = Blackboard::new(0);
    for (i, c) in conds.iter().enumerate() {
        b.set(format!("c{i}"), BoardValue::Bool(*c));
    }
    b
}

/// Checks one tree against the oracle and the short-circuit and determinism
/// laws. Returns a description of the first violation.
pub fn check_tree(ast: &Ast, conds: &[bool]) -> Result<(), String> {
    let mut tree = Tree::new();
    let built = build(&mut tree, ast);
    tree.set_root(built.id);
    let mut board = board_with(conds);
    let status = tree.tick(&mut board, &mut ()).map_err(|e| e.to_string())?;
    let trace = tree.last_trace().to_vec();
    let mut expected_trace = Vec::new();
    let expected = oracle(ast, &built, conds, &mut expected_trace);
    if status != expected || trace != expected_trace {
        return Err(format!("oracle mismatch: {status:?} vs {expected:?}"));
    }
    // short circuit: nothing after the deciding child is visited
    fn short_circuit(ast: &Ast, built: &Built, visited: &[NodeId], conds: &[bool]) -> Result<(), String> {
        let (kids, stop_on) = match ast {
            Ast::Seq(k) => (k, TickStatus::Success),
            Ast::Fb(k) => (k, TickStatus::Failure),
            _ => return Ok(()),
        };
        if !visited.contains(&built.id) {
            return Ok(());
        }
        let mut decided = false;
        for (k, b) in kids.iter().zip(&built.children) {
            if decided && visited.contains(&b.id) {
                return Err("child visited after short-circuit".into());
            }
            if !decided {
                short_circuit(k, b, visited, conds)?;
                let mut t = Vec::new();
                if oracle(k, b, conds, &mut t) != stop_on {
                    decided = true;
                }
            }
        }
        Ok(())
    }
    short_circuit(ast, &built, &trace, conds)?;
    let again = tree.tick(&mut board, &mut ()).map_err(|e| e.to_string())?;
    if again != status || tree.last_trace() != trace.as_slice() {
        return Err("second tick differs".into());
    }
    Ok(())
}

// ------------------------------------------------------------ latch model

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefLatch {
    Free,
    Arming(u32),
    Locked,
    Releasing(u32),
}

impl RefLatch {
    pub fn name(self) -> &'static str {
        match self {
            RefLatch::Free => "Free",
            RefLatch::Arming(_) => "Arming",
            RefLatch::Locked => "Locked",
            RefLatch::Releasing(_) => "Releasing",
        }
    }

    /// One observation at tick `k`; dwell times are `grasp` / `release` ticks.
    pub fn step(self, k: u32, on: bool, near: bool, grasp: u32, release: u32) -> Self {
        match self {
            RefLatch::Free => {
                if on && near {
                    RefLatch::Arming(k)
                } else {
                    RefLatch::Free
                }
            }
            RefLatch::Arming(t) => {
                if !on || !near {
                    RefLatch::Free
                } else if k - t >= grasp {
                    RefLatch::Locked
                } else {
                    self
                }
            }
            RefLatch::Locked => {
                if on {
                    RefLatch::Locked
                } else {
                    RefLatch::Releasing(k)
                }
            }
            RefLatch::Releasing(t) => {
                if on {
                    RefLatch::Locked
                } else if k - t >= release {
                    RefLatch::Free
                } else {
                    self
                }
            }
        }
    }
}

// ------------------------------------------------------------ step lists

const REFS: [&str; 7] = ["red", "green", "blue", "red_short", "blue_tall", "green_short", "purple"];

fn random_orientation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    let yaw: f64 = rng.random_range(-90.0..90.0);
    let roll: f64 = if rng.random_bool(0.2) { rng.random_range(-30.0..30.0) } else { 0.0 };
    UnitQuaternion::from_euler_angles(roll.to_radians(), 0.0, yaw.to_radians())
}

pub fn random_step(rng: &mut impl Rng) -> TaskStep {
    let duration = rng.random_bool(0.3).then(|| rng.random_range(0.2..1.5));
    match rng.random_range(0..3) {
        0 => {
            let target = match rng.random_range(0..6) {
                0 | 1 => MoveTarget::Absolute {
                    translation: Vector3::new(
                        rng.random_range(0.2..0.7),
                        rng.random_range(-0.3..0.3),
                        rng.random_range(0.05..0.4),
                    ),
                    orientation: random_orientation(rng),
                },
                2 => MoveTarget::Relative {
                    delta: Vector3::new(
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                        rng.random_range(-0.1..0.1),
                    ),
                    orientation: maybe_orientation(rng),
                },
                3 => MoveTarget::Anchored {
                    object_ref: REFS[rng.random_range(0..REFS.len())].to_owned(),
                    offset: Vector3::new(0.0, 0.0, rng.random_range(0.0..0.08)),
                    orientation: maybe_orientation(rng),
                },
                4 => MoveTarget::Place {
                    clearance: rng.random_range(0.0..0.05),
                    orientation: maybe_orientation(rng),
                },
                _ => MoveTarget::Absolute {
                    translation: Vector3::new(1.5, 0.0, 0.2),
                    orientation: UnitQuaternion::identity(),
                },
            };
            TaskStep::moving(target, duration)
        }
        1 => {
            let wait = match rng.random_range(0..3) {
                0 => None,
                1 => Some(WaitFor::Locked),
                _ => Some(WaitFor::Free),
            };
            TaskStep::gripper(rng.random_bool(0.5), wait)
        }
        _ => TaskStep::perceive(REFS[rng.random_range(0..REFS.len())]),
    }
}

fn maybe_orientation(rng: &mut impl Rng) -> Option<UnitQuaternion<f64>> {
    rng.random_bool(0.5).then(|| random_orientation(rng))
}

pub fn random_steps(rng: &mut impl Rng, max_len: usize) -> Vec<TaskStep> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| random_step(rng)).collect()
}

/// Largest translation gap (metres) between two worlds' tip and bricks, and
/// largest orientation gap (radians).
pub fn world_gap(a: &World, b: &World) -> (f64, f64) {
    let mut dt = (a.tip().translation - b.tip().translation).norm();
    let mut dr = a.tip().orientation.angle_to(&b.tip().orientation);
    for (x, y) in a.bricks().iter().zip(b.bricks()) {
        dt = dt.max((x.pose.translation - y.pose.translation).norm());
        dr = dr.max(x.pose.orientation.angle_to(&y.pose.orientation));
    }
    (dt, dr)
}

// ------------------------------------------------------------ commands

fn random_ident(rng: &mut impl Rng) -> String {
    const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    let mut s = String::new();
    s.push(FIRST[rng.random_range(0..FIRST.len())] as char);
    for _ in 0..rng.random_range(0..10) {
        s.push(REST[rng.random_range(0..REST.len())] as char);
    }
    s
}

fn random_text(rng: &mut impl Rng) -> String {
    const POOL: &[char] = &['a', 'z', 'R', '0', ' ', '\'', '"', '\\', ',', '(', ')', '[', '{', ':', '=', 'é', '→'];
    (0..rng.random_range(0..8)).map(|_| POOL[rng.random_range(0..POOL.len())]).collect()
}

fn random_number(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-100..100) as f64,
        1 => rng.random_range(-1000.0..1000.0),
        2 => rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-12..12)),
        _ => f64::from_bits(rng.random::<u64>() >> 2),
    }
}

pub fn random_value(rng: &mut impl Rng, depth: u32) -> Value {
    match rng.random_range(0..if depth == 0 { 2 } else { 4 }) {
        0 => Value::Str(random_text(rng)),
        1 => Value::Num(random_number(rng)),
        2 => Value::Array((0..rng.random_range(0..4)).map(|_| random_value(rng, depth - 1)).collect()),
        _ => Value::Map(
            (0..rng.random_range(0..3))
                .map(|_| (random_text(rng), random_text(rng)))
                .collect(),
        ),
    }
}

pub fn random_command(rng: &mut impl Rng) -> Command {
    let positional = (0..rng.random_range(0..4)).map(|_| random_value(rng, 2)).collect();
    let keyword: BTreeMap<String, Value> = (0..rng.random_range(0..4))
        .map(|_| (random_ident(rng), random_value(rng, 2)))
        .collect();
    Command {
        name: random_ident(rng),
        positional,
        keyword,
        raw: String::new(),
    }
}
