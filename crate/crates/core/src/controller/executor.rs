use crate::bt::{BoardValue, Blackboard, NodeId, NodeKind, TickStatus, Tree, CHOOSER_FAILED_KEY};
use crate::sim::World;
use crate::skills::{build_base_skill, failure_cause, BaseSkillKind, CustomSkill, Plant, SkillSpec, TaskStep};

use super::ControllerError;

/// Board key holding the number of custom steps still to complete.
pub const REMAINING_KEY: &str = "custom.remaining";

/// The session tree with handles to its named nodes.
pub struct MainTree {
    pub tree: Tree<Plant>,
    pub root: NodeId,
    pub xor: NodeId,
    pub chooser: NodeId,
    /// Chooser children in flag order.
    pub base: [NodeId; 3],
    pub remaining: NodeId,
    pub custom: NodeId,
}

fn remaining_and_no_failure(board: &Blackboard) -> Result<bool, crate::bt::BtError> {
    Ok(board.get_number(REMAINING_KEY)? > 0.0 && !board.contains(CHOOSER_FAILED_KEY))
}

/// `Fallback(Sequence(XorGate, Chooser(MOVE, GRIPPER, PERCEPTION)),
/// Sequence(Condition n > 0, CustomSkill))`.
pub fn build_main_tree(library: &[SkillSpec]) -> Result<MainTree, ControllerError> {
    let mut tree = Tree::new();
    let mut base = [NodeId(0); 3];
    for kind in BaseSkillKind::ALL {
        if !library.iter().any(|s| s.base_kind() == Some(kind)) {
            return Err(ControllerError::MissingBaseSkill(kind.label().to_owned()));
        }
        base[kind.index()] = build_base_skill(&mut tree, kind);
    }
    let xor = tree.add("x-or", NodeKind::XorGate, vec![]);
    let chooser = tree.add("chooser", NodeKind::Chooser, base.to_vec());
    let left = tree.sequence("base skills", vec![xor, chooser]);
    let remaining = tree.condition("n > 0", remaining_and_no_failure);
    let custom = tree.add("custom skill", NodeKind::CustomSkill(Box::new(CustomSkill::default())), vec![]);
    let right = tree.sequence("custom", vec![remaining, custom]);
    let root = tree.fallback("root", vec![left, right]);
    tree.set_root(root);
    tree.validate()?;
    Ok(MainTree {
        tree,
        root,
        xor,
        chooser,
        base,
        remaining,
        custom,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleStatus {
    /// No program loaded.
    Idle,
    Running,
    Succeeded,
    Failed(String),
}

/// Runs step programs through the main tree against a plant.
pub struct Executor {
    main: MainTree,
    board: Blackboard,
    plant: Plant,
    n: usize,
    period: f64,
}

impl Executor {
    pub fn new(world: World, library: &[SkillSpec]) -> Result<Self, ControllerError> {
        let period = world.scene().tick_period();
        let plant = Plant::new(world);
        let mut board = Blackboard::new(BaseSkillKind::ALL.len());
        plant.publish(&mut board);
        board.set(REMAINING_KEY, BoardValue::Number(0.0));
        Ok(Self {
            main: build_main_tree(library)?,
            board,
            plant,
            n: 0,
            period,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn plant_mut(&mut self) -> &mut Plant {
        &mut self.plant
    }

    pub fn world(&self) -> &World {
        &self.plant.world
    }

    pub fn board(&self) -> &Blackboard {
        &self.board
    }

    pub fn main_tree(&self) -> &MainTree {
        &self.main
    }

    /// Custom steps not yet completed.
    pub fn remaining(&self) -> usize {
        self.n
    }

    pub fn is_busy(&self) -> bool {
        self.n > 0
    }

    /// Control period in seconds.
    pub fn period(&self) -> f64 {
        self.period
    }

    fn custom(&mut self) -> &mut CustomSkill {
        self.main
            .tree
            .behaviour_mut::<CustomSkill>(self.main.custom)
            .expect("custom node holds a CustomSkill")
    }

    /// Loads a program; `n` becomes its length.
    pub fn start(&mut self, steps: Vec<TaskStep>) {
        assert!(!self.is_busy(), "a program is already running");
        self.main.tree.reset_all();
        self.board.clear_chooser_flags();
        self.board.remove(CHOOSER_FAILED_KEY);
        self.n = steps.len();
        self.custom().load(steps);
        self.board.set(REMAINING_KEY, BoardValue::Number(self.n as f64));
    }

    /// Steps the world through one period and republishes its state.
    pub fn advance(&mut self) {
        self.plant.advance(self.period);
        self.plant.publish(&mut self.board);
    }

    fn raised(&self) -> Option<usize> {
        self.board.chooser_flags().iter().position(|f| *f)
    }

    /// Ticks the main tree once and updates the step counter.
    pub fn tick(&mut self) -> CycleStatus {
        self.board.set(REMAINING_KEY, BoardValue::Number(self.n as f64));
        let before = self.raised();
        let result = self.main.tree.tick(&mut self.board, &mut self.plant);
        if self.n == 0 {
            return CycleStatus::Idle;
        }
        match result {
            Err(e) => self.fail(e.to_string()),
            Ok(TickStatus::Running) => CycleStatus::Running,
            Ok(TickStatus::Success) => {
                if before.is_some() && self.raised().is_none() {
                    self.n -= 1;
                    self.board.set(REMAINING_KEY, BoardValue::Number(self.n as f64));
                    if self.n == 0 {
                        return CycleStatus::Succeeded;
                    }
                }
                CycleStatus::Running
            }
            Ok(TickStatus::Failure) => {
                let cause = self.failure_detail();
                self.fail(cause)
            }
        }
    }

    pub fn cycle(&mut self) -> CycleStatus {
        self.advance();
        self.tick()
    }

    fn failure_detail(&mut self) -> String {
        if let Ok(index) = self.board.get_number(CHOOSER_FAILED_KEY) {
            let kind = BaseSkillKind::ALL[index as usize];
            return failure_cause(kind, &self.board, &self.plant.world);
        }
        let setup_error = self.plant.last_setup_error.clone();
        let custom = self.custom();
        let step = custom.step();
        let label = custom
            .tasks()
            .get(step.wrapping_sub(1))
            .map(|t| t.kind.label().to_owned())
            .unwrap_or_default();
        match setup_error {
            Some(e) => format!("step {step} ({label}): {e}"),
            None => format!("step {step}: unknown task kind `{label}`"),
        }
    }

    fn fail(&mut self, cause: String) -> CycleStatus {
        self.abort();
        CycleStatus::Failed(cause)
    }

    /// Drops the current program and halts any motion.
    pub fn abort(&mut self) {
        self.plant.world.cancel_motion();
        self.n = 0;
        self.board.clear_chooser_flags();
        self.board.remove(CHOOSER_FAILED_KEY);
        self.board.set(REMAINING_KEY, BoardValue::Number(0.0));
        self.main.tree.reset_all();
        self.plant.last_setup_error = None;
    }

    /// Restores the scene's initial layout; the clock keeps running.
    pub fn reset_world(&mut self) {
        self.abort();
        self.plant.world.reset();
        self.plant.publish(&mut self.board);
    }

    /// Runs a program to completion; `None` if it exceeds `max_cycles`.
    pub fn run(&mut self, steps: Vec<TaskStep>, max_cycles: usize) -> Option<CycleStatus> {
        self.start(steps);
        for _ in 0..max_cycles {
            match self.cycle() {
                CycleStatus::Running => {}
                done => return Some(done),
            }
        }
        None
    }
}
