//! Behaviour-tree engine.
//!
//! Trees are stored in an arena and ticked depth-first, left to right. Besides
//! the usual Sequence/Fallback/Condition/Action nodes the engine provides the
//! either-or construct used by the task controller: an [`NodeKind::XorGate`]
//! that succeeds only when exactly one chooser flag is raised, and a
//! [`NodeKind::Chooser`] that ticks the flagged child.
//!
//! Composites are memoryless: every tick starts from the first child. State
//! that must survive across ticks (running controllers, custom-skill step
//! counters) lives inside the leaf behaviours and is cleared by
//! [`Tree::reset`].

mod blackboard;

use std::any::Any;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use blackboard::{BoardValue, Blackboard};

/// Board key written by a chooser when the child it ticked returned Failure.
/// Holds the index of the failed child.
pub const CHOOSER_FAILED_KEY: &str = "chooser.failed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TickStatus {
    Success,
    Failure,
    Running,
}

impl From<bool> for TickStatus {
    fn from(ok: bool) -> Self {
        if ok {
            TickStatus::Success
        } else {
            TickStatus::Failure
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtError {
    #[error("malformed tree: {0}")]
    Structural(String),
    #[error("chooser guard violated: {raised} flags raised, expected exactly one")]
    GuardViolation { raised: usize },
    #[error("blackboard has no entry `{0}`")]
    MissingKey(String),
    #[error("blackboard entry `{key}` is {found}, expected {expected}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("chooser flag index {index} out of range for {len} flags")]
    FlagIndex { index: usize, len: usize },
    #[error("{0}")]
    Leaf(String),
}

/// True iff exactly one flag is raised. An empty flag array is a structural error.
pub fn xor_satisfied(flags: &[bool]) -> Result<bool, BtError> {
    if flags.is_empty() {
        return Err(BtError::Structural("xor over an empty flag array".into()));
    }
    Ok(flags.iter().filter(|f| **f).count() == 1)
}

/// Leaf behaviour with access to the blackboard and an application context.
pub trait Action<C>: Send {
    fn tick(&mut self, board: &mut Blackboard, ctx: &mut C) -> Result<TickStatus, BtError>;

    /// Clears node-local state.
    fn reset(&mut self) {}

    /// Lets the owner reach the concrete behaviour, e.g. to load a program.
    fn as_any_mut(&mut self) -> Option<&mut dyn Any> {
        None
    }
}

pub type ConditionFn = Box<dyn Fn(&Blackboard) -> Result<bool, BtError> + Send>;

pub enum NodeKind<C> {
    Sequence,
    Fallback,
    Condition(ConditionFn),
    Action(Box<dyn Action<C>>),
    XorGate,
    Chooser,
    CustomSkill(Box<dyn Action<C>>),
}

/// Kind tag without the payload, for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindTag {
    Sequence,
    Fallback,
    Condition,
    Action,
    XorGate,
    Chooser,
    CustomSkill,
}

impl<C> NodeKind<C> {
    pub fn tag(&self) -> KindTag {
        match self {
            NodeKind::Sequence => KindTag::Sequence,
            NodeKind::Fallback => KindTag::Fallback,
            NodeKind::Condition(_) => KindTag::Condition,
            NodeKind::Action(_) => KindTag::Action,
            NodeKind::XorGate => KindTag::XorGate,
            NodeKind::Chooser => KindTag::Chooser,
            NodeKind::CustomSkill(_) => KindTag::CustomSkill,
        }
    }
}

impl KindTag {
    fn is_composite(self) -> bool {
        matches!(self, KindTag::Sequence | KindTag::Fallback | KindTag::Chooser)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub struct Node<C> {
    pub name: String,
    pub kind: NodeKind<C>,
    pub children: Vec<NodeId>,
}

/// Arena-backed behaviour tree over an application context `C`.
pub struct Tree<C> {
    nodes: Vec<Node<C>>,
    root: Option<NodeId>,
    trace: Vec<NodeId>,
}

impl<C> Default for Tree<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C> Tree<C> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            root: None,
            trace: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, kind: NodeKind<C>, children: Vec<NodeId>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            name: name.into(),
            kind,
            children,
        });
        id
    }

    pub fn sequence(&mut self, name: &str, children: Vec<NodeId>) -> NodeId {
        self.add(name, NodeKind::Sequence, children)
    }

    pub fn fallback(&mut self, name: &str, children: Vec<NodeId>) -> NodeId {
        self.add(name, NodeKind::Fallback, children)
    }

    pub fn condition<F>(&mut self, name: &str, predicate: F) -> NodeId
    where
        F: Fn(&Blackboard) -> Result<bool, BtError> + Send + 'static,
    {
        self.add(name, NodeKind::Condition(Box::new(predicate)), Vec::new())
    }

    pub fn action(&mut self, name: &str, action: impl Action<C> + 'static) -> NodeId {
        self.add(name, NodeKind::Action(Box::new(action)), Vec::new())
    }

    pub fn set_root(&mut self, root: NodeId) {
        self.root = Some(root);
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node<C>> {
        self.nodes.get(id.0)
    }

    pub fn kind_of(&self, id: NodeId) -> Option<KindTag> {
        self.node(id).map(|n| n.kind.tag())
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.node(id).map(|n| n.children.as_slice()).unwrap_or(&[])
    }

    /// Nodes visited by the last tick, in visit order.
    pub fn last_trace(&self) -> &[NodeId] {
        &self.trace
    }

    /// Mutable access to the concrete behaviour behind an Action or CustomSkill node.
    pub fn behaviour_mut<T: 'static>(&mut self, id: NodeId) -> Option<&mut T> {
        match &mut self.nodes.get_mut(id.0)?.kind {
            NodeKind::Action(a) | NodeKind::CustomSkill(a) => a.as_any_mut()?.downcast_mut::<T>(),
            _ => None,
        }
    }

    /// Checks that the nodes reachable from the root form a tree with valid arity.
    pub fn validate(&self) -> Result<(), BtError> {
        let root = self
            .root
            .ok_or_else(|| BtError::Structural("tree has no root".into()))?;
        if root.0 >= self.nodes.len() {
            return Err(BtError::Structural(format!("root {root} does not exist")));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen[id.0] {
                return Err(BtError::Structural(format!(
                    "node {id} reached twice (cycle or shared child)"
                )));
            }
            seen[id.0] = true;
            let node = &self.nodes[id.0];
            let tag = node.kind.tag();
            match (tag.is_composite(), node.children.len()) {
                (true, 0) => {
                    return Err(BtError::Structural(format!(
                        "{tag:?} node {id} `{}` has no children",
                        node.name
                    )))
                }
                (false, n) if n > 0 => {
                    return Err(BtError::Structural(format!(
                        "{tag:?} node {id} `{}` must be a leaf",
                        node.name
                    )))
                }
                _ => {}
            }
            for &child in node.children.iter().rev() {
                if child.0 >= self.nodes.len() {
                    return Err(BtError::Structural(format!(
                        "node {id} references missing child {child}"
                    )));
                }
                stack.push(child);
            }
        }
        Ok(())
    }

    /// One depth-first, left-to-right pass from the root.
    pub fn tick(&mut self, board: &mut Blackboard, ctx: &mut C) -> Result<TickStatus, BtError> {
        self.validate()?;
        self.trace.clear();
        let root = self.root.expect("validated");
        self.tick_node(root, board, ctx)
    }

    fn tick_node(&mut self, id: NodeId, board: &mut Blackboard, ctx: &mut C) -> Result<TickStatus, BtError> {
        self.trace.push(id);
        let tag = self.nodes[id.0].kind.tag();
        match tag {
            KindTag::Sequence => {
                for child in self.nodes[id.0].children.clone() {
                    let status = self.tick_node(child, board, ctx)?;
                    if status != TickStatus::Success {
                        return Ok(status);
                    }
                }
                Ok(TickStatus::Success)
            }
            KindTag::Fallback => {
                for child in self.nodes[id.0].children.clone() {
                    let status = self.tick_node(child, board, ctx)?;
                    if status != TickStatus::Failure {
                        return Ok(status);
                    }
                }
                Ok(TickStatus::Failure)
            }
            KindTag::XorGate => Ok(xor_satisfied(board.chooser_flags())?.into()),
            KindTag::Chooser => self.tick_chooser(id, board, ctx),
            KindTag::Condition => match &self.nodes[id.0].kind {
                NodeKind::Condition(pred) => Ok(pred(board)?.into()),
                _ => unreachable!(),
            },
            KindTag::Action | KindTag::CustomSkill => match &mut self.nodes[id.0].kind {
                NodeKind::Action(a) | NodeKind::CustomSkill(a) => a.tick(board, ctx),
                _ => unreachable!(),
            },
        }
    }

    fn tick_chooser(&mut self, id: NodeId, board: &mut Blackboard, ctx: &mut C) -> Result<TickStatus, BtError> {
        let children = self.nodes[id.0].children.clone();
        let flags = board.chooser_flags();
        if flags.len() != children.len() {
            return Err(BtError::Structural(format!(
                "chooser {id} has {} children but {} flags",
                children.len(),
                flags.len()
            )));
        }
        let raised: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
            .collect();
        let [index] = raised[..] else {
            return Err(BtError::GuardViolation {
                raised: raised.len(),
            });
        };
        let status = self.tick_node(children[index], board, ctx)?;
        match status {
            TickStatus::Success => board.clear_flag(index)?,
            TickStatus::Failure => {
                board.clear_flag(index)?;
                board.set(CHOOSER_FAILED_KEY, BoardValue::Number(index as f64));
            }
            TickStatus::Running => {}
        }
        Ok(status)
    }

    /// Clears node-local state in the subtree rooted at `id`.
    pub fn reset(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            let Some(node) = self.nodes.get_mut(id.0) else {
                continue;
            };
            if let NodeKind::Action(a) | NodeKind::CustomSkill(a) = &mut node.kind {
                a.reset();
            }
            stack.extend(node.children.iter().copied());
        }
    }

    pub fn reset_all(&mut self) {
        if let Some(root) = self.root {
            self.reset(root);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Returns a fixed status and counts ticks.
    struct Scripted {
        status: TickStatus,
        ticks: usize,
    }

    impl Scripted {
        fn new(status: TickStatus) -> Self {
            Self { status, ticks: 0 }
        }
    }

    impl Action<()> for Scripted {
        fn tick(&mut self, _: &mut Blackboard, _: &mut ()) -> Result<TickStatus, BtError> {
            self.ticks += 1;
            Ok(self.status)
        }
        fn reset(&mut self) {
            self.ticks = 0;
        }
        fn as_any_mut(&mut self) -> Option<&mut dyn Any> {
            Some(self)
        }
    }

    fn ticks(tree: &mut Tree<()>, id: NodeId) -> usize {
        tree.behaviour_mut::<Scripted>(id).unwrap().ticks
    }

    #[test]
    fn fallback_short_circuits_on_success() {
        let mut tree = Tree::new();
        let cond = tree.condition("ok", |_| Ok(true));
        let act = tree.action("act", Scripted::new(TickStatus::Success));
        let root = tree.fallback("root", vec![cond, act]);
        tree.set_root(root);
        let status = tree.tick(&mut Blackboard::new(1), &mut ()).unwrap();
        assert_eq!(status, TickStatus::Success);
        assert_eq!(ticks(&mut tree, act), 0);
        assert_eq!(tree.last_trace(), &[root, cond]);
    }

    #[test]
    fn sequence_propagates_running() {
        let mut tree = Tree::new();
        let cond = tree.condition("ok", |_| Ok(true));
        let act = tree.action("act", Scripted::new(TickStatus::Running));
        let root = tree.sequence("root", vec![cond, act]);
        tree.set_root(root);
        assert_eq!(
            tree.tick(&mut Blackboard::new(1), &mut ()),
            Ok(TickStatus::Running)
        );
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor_satisfied(&[true, false, false]), Ok(true));
        assert_eq!(xor_satisfied(&[false, false, false]), Ok(false));
        assert_eq!(xor_satisfied(&[true, true, false]), Ok(false));
        assert!(matches!(xor_satisfied(&[]), Err(BtError::Structural(_))));
    }

    #[test]
    fn xor_matches_exactly_one_over_all_three_flag_cases() {
        for bits in 0u8..8 {
            let flags: Vec<bool> = (0..3).map(|i| bits & (1 << i) != 0).collect();
            let expected = matches!(bits, 1 | 2 | 4);
            assert_eq!(xor_satisfied(&flags), Ok(expected), "{flags:?}");
        }
    }

    fn chooser_tree(statuses: [TickStatus; 3]) -> (Tree<()>, [NodeId; 3]) {
        let mut tree = Tree::new();
        let kids = statuses.map(|s| tree.action("skill", Scripted::new(s)));
        let chooser = tree.add("chooser", NodeKind::Chooser, kids.to_vec());
        tree.set_root(chooser);
        (tree, kids)
    }

    #[test]
    fn chooser_running_leaves_flags() {
        use TickStatus::*;
        let (mut tree, kids) = chooser_tree([Success, Running, Success]);
        let mut board = Blackboard::new(3);
        board.raise_flag(1).unwrap();
        assert_eq!(tree.tick(&mut board, &mut ()), Ok(Running));
        assert_eq!(board.chooser_flags(), &[false, true, false]);
        assert_eq!(ticks(&mut tree, kids[0]), 0);
        assert_eq!(ticks(&mut tree, kids[1]), 1);
    }

    #[test]
    fn chooser_success_clears_flag() {
        use TickStatus::*;
        let (mut tree, _) = chooser_tree([Success, Running, Running]);
        let mut board = Blackboard::new(3);
        board.raise_flag(0).unwrap();
        assert_eq!(tree.tick(&mut board, &mut ()), Ok(Success));
        assert_eq!(board.chooser_flags(), &[false; 3]);
    }

    #[test]
    fn chooser_failure_is_recorded() {
        use TickStatus::*;
        let (mut tree, _) = chooser_tree([Success, Success, Failure]);
        let mut board = Blackboard::new(3);
        board.raise_flag(2).unwrap();
        assert_eq!(tree.tick(&mut board, &mut ()), Ok(Failure));
        assert_eq!(board.get_number(CHOOSER_FAILED_KEY), Ok(2.0));
        assert_eq!(board.chooser_flags(), &[false; 3]);
    }

    #[test]
    fn chooser_without_single_flag_is_guard_violation() {
        let mut tree = Tree::new();
        let a = tree.action("a", Scripted::new(TickStatus::Success));
        let b = tree.action("b", Scripted::new(TickStatus::Success));
        let chooser = tree.add("chooser", NodeKind::Chooser, vec![a, b]);
        tree.set_root(chooser);
        let mut board = Blackboard::new(2);
        assert_eq!(
            tree.tick(&mut board, &mut ()),
            Err(BtError::GuardViolation { raised: 0 })
        );
        board.set_chooser_flags(&[true, true]).unwrap();
        assert_eq!(
            tree.tick(&mut board, &mut ()),
            Err(BtError::GuardViolation { raised: 2 })
        );
    }

    #[test]
    fn chooser_flag_count_must_match_children() {
        let (mut tree, _) = chooser_tree([TickStatus::Success; 3]);
        let mut board = Blackboard::new(2);
        board.raise_flag(0).unwrap();
        assert!(matches!(
            tree.tick(&mut board, &mut ()),
            Err(BtError::Structural(_))
        ));
    }

    #[test]
    fn structural_errors_precede_any_tick() {
        let mut tree: Tree<()> = Tree::new();
        let act = tree.action("act", Scripted::new(TickStatus::Success));
        let seq = tree.sequence("seq", vec![act]);
        // Make the sequence its own child.
        tree.nodes[seq.0].children.push(seq);
        tree.set_root(seq);
        assert!(matches!(
            tree.tick(&mut Blackboard::new(1), &mut ()),
            Err(BtError::Structural(_))
        ));
        assert_eq!(ticks(&mut tree, act), 0);

        let mut tree: Tree<()> = Tree::new();
        let empty = tree.sequence("empty", vec![]);
        tree.set_root(empty);
        assert!(tree.validate().is_err());

        let mut tree: Tree<()> = Tree::new();
        let leaf = tree.condition("c", |_| Ok(true));
        let bad = tree.add("bad", NodeKind::Condition(Box::new(|_| Ok(true))), vec![leaf]);
        tree.set_root(bad);
        assert!(tree.validate().is_err());

        let mut tree: Tree<()> = Tree::new();
        let shared = tree.condition("c", |_| Ok(true));
        let root = tree.sequence("root", vec![shared, shared]);
        tree.set_root(root);
        assert!(tree.validate().is_err());
    }

    #[test]
    fn condition_missing_key_is_an_error() {
        let mut tree: Tree<()> = Tree::new();
        let c = tree.condition("c", |b| b.get_bool("flag"));
        tree.set_root(c);
        assert_eq!(
            tree.tick(&mut Blackboard::new(1), &mut ()),
            Err(BtError::MissingKey("flag".into()))
        );
    }

    #[test]
    fn reset_clears_leaf_state_and_is_noop_on_conditions() {
        let mut tree = Tree::new();
        let c = tree.condition("c", |_| Ok(true));
        let act = tree.action("act", Scripted::new(TickStatus::Success));
        let root = tree.sequence("root", vec![c, act]);
        tree.set_root(root);
        let mut board = Blackboard::new(1);
        tree.tick(&mut board, &mut ()).unwrap();
        assert_eq!(ticks(&mut tree, act), 1);
        tree.reset(c);
        assert_eq!(ticks(&mut tree, act), 1);
        tree.reset(root);
        assert_eq!(ticks(&mut tree, act), 0);
    }
}
