use std::any::Any;

use super::{TaskKind, TaskStep};
use crate::bt::{Action, Blackboard, BtError, TickStatus};

/// Whatever can initialize a base skill's controller data.
pub trait SkillHost {
    /// Installs the controller data for `step`. Returns false when the step
    /// cannot be set up (e.g. its anchor keypoint was never perceived).
    fn set_up_task(&mut self, step: &TaskStep, board: &mut Blackboard) -> bool;
}

/// Runs a recorded step list through the chooser, one base skill per call.
#[derive(Debug, Clone, Default)]
pub struct CustomSkill {
    step: usize,
    tasks: Vec<TaskStep>,
}

impl CustomSkill {
    pub fn new(tasks: Vec<TaskStep>) -> Self {
        Self { step: 0, tasks }
    }

    /// Installs a new program and resets the step counter.
    pub fn load(&mut self, tasks: Vec<TaskStep>) {
        self.tasks = tasks;
        self.step = 0;
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[TaskStep] {
        &self.tasks
    }

    /// Clears the chooser flags; once the program is exhausted returns true.
    /// Otherwise takes the next step, advances the counter and, for a base
    /// skill, sets it up and raises its flag so the chooser selects it on the
    /// next cycle. Unknown task kinds return false.
    pub fn tick_program<H: SkillHost>(&mut self, board: &mut Blackboard, host: &mut H) -> bool {
        board.clear_chooser_flags();
        if self.step >= self.tasks.len() {
            return true;
        }
        let task = &self.tasks[self.step];
        self.step += 1;
        match task.kind {
            TaskKind::Base(kind) => {
                if !task.is_well_formed() || !host.set_up_task(task, board) {
                    return false;
                }
                board.raise_flag(kind.index()).is_ok()
            }
            TaskKind::Other(_) => false,
        }
    }
}

impl<C: SkillHost> Action<C> for CustomSkill {
    fn tick(&mut self, board: &mut Blackboard, ctx: &mut C) -> Result<TickStatus, BtError> {
        Ok(self.tick_program(board, ctx).into())
    }

    fn reset(&mut self) {
        self.step = 0;
    }

    fn as_any_mut(&mut self) -> Option<&mut dyn Any> {
        Some(self)
    }
}
