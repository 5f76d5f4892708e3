//! Session orchestration: polls the knowledge graph for Tasked events, runs
//! each as a step program through the main tree and records the outcome.

mod executor;
mod task;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bt::BtError;
use crate::kg::{format_timestamp, AttrValue, Attributes, ElementId, EventRecord, KgError, KnowledgeGraph, Label, SkillKind, Timestamp};
use crate::sim::{Scene, World, WorldFrame};
use crate::skills::{default_library, SkillBody, SkillSpec};

pub use executor::{build_main_tree, CycleStatus, Executor, MainTree, REMAINING_KEY};
pub use task::TaskRequest;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("skill library lacks base skill {0}")]
    MissingBaseSkill(String),
    #[error(transparent)]
    Bt(#[from] BtError),
    #[error(transparent)]
    Kg(#[from] KgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeStatus {
    Succeeded,
    Failed,
    Stopped,
}

impl OutcomeStatus {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeStatus::Succeeded => "Succeeded",
            OutcomeStatus::Failed => "Failed",
            OutcomeStatus::Stopped => "Stopped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: ElementId,
    pub status: OutcomeStatus,
    pub detail: String,
    /// Milliseconds since the Unix epoch.
    pub ts: Timestamp,
}

/// A Tasked event as shown to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub event_id: ElementId,
    pub time_stamp: String,
    pub ts: Timestamp,
    pub signature: String,
    pub skill: String,
    /// Outcome status once the task has finished.
    pub status: Option<OutcomeStatus>,
}

/// Pushed to stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum StreamMessage {
    World(WorldFrame),
    Outcome(TaskOutcome),
    Event(TaskSummary),
}

const STATUS_KEY: &str = "status";
const DETAIL_KEY: &str = "detail";

/// Owns the graph, the world and the main tree.
pub struct Session {
    kg: KnowledgeGraph,
    agent: ElementId,
    subjects: BTreeMap<String, ElementId>,
    library: Vec<SkillSpec>,
    executor: Executor,
    active: Option<EventRecord>,
    /// Tasked events (in insertion order) already finished.
    processed: usize,
    stop_requested: bool,
    outcomes: Vec<TaskOutcome>,
    stream: Option<Vec<StreamMessage>>,
    epoch_ms: Timestamp,
    observation_period_ms: u64,
    next_observation_ms: u64,
}

impl Session {
    /// Starts a session on `scene`. A restored graph keeps its history; its
    /// Tasked events count as already processed. `epoch_ms` anchors sim time
    /// to wall time and is moved past the graph's latest event if needed.
    pub fn new(scene: Scene, kg: Option<KnowledgeGraph>, epoch_ms: Timestamp) -> Result<Self, ControllerError> {
        Self::with_library(scene, kg, epoch_ms, default_library())
    }

    pub fn with_library(
        scene: Scene,
        kg: Option<KnowledgeGraph>,
        epoch_ms: Timestamp,
        library: Vec<SkillSpec>,
    ) -> Result<Self, ControllerError> {
        let mut kg = kg.unwrap_or_default();
        let world = World::new(scene);
        let executor = Executor::new(world, &library)?;
        let world = executor.world();

        let agent = match kg.find_named(Label::Agent, &world.scene().robot_name) {
            Some(id) => id,
            None => kg.add_agent(&world.scene().robot_name, world.tip()),
        };
        let mut subjects = BTreeMap::from([(world.scene().robot_name.clone(), agent)]);
        for brick in world.bricks() {
            let id = match kg.find_named(Label::Object, &brick.name) {
                Some(id) => id,
                None => kg.add_object(brick),
            };
            subjects.insert(brick.name.clone(), id);
        }
        for spec in &library {
            if kg.skill_kind(&spec.name).is_some() {
                continue;
            }
            let kind = match spec.body {
                SkillBody::Base(_) => SkillKind::Base,
                SkillBody::Derived => SkillKind::Derived,
                SkillBody::Composite(_) => SkillKind::Custom,
            };
            let params = Attributes::from([
                ("Pre".to_owned(), AttrValue::Str(spec.pre.clone())),
                ("Post".to_owned(), AttrValue::Str(spec.post.clone())),
            ]);
            kg.register_skill(&spec.name, kind, params)?;
        }

        let epoch_ms = match kg.latest_timestamp() {
            Some(latest) => epoch_ms.max(latest + 1),
            None => epoch_ms,
        };
        let rate = world.scene().controller.observation_rate;
        let observation_period_ms = ((1000.0 / rate).round() as u64).max(1);
        let processed = kg.tasked_count();
        let mut session = Self {
            kg,
            agent,
            subjects,
            library,
            executor,
            active: None,
            processed,
            stop_requested: false,
            outcomes: Vec::new(),
            stream: None,
            epoch_ms,
            observation_period_ms,
            next_observation_ms: 0,
        };
        session.observe()?;
        Ok(session)
    }

    pub fn kg(&self) -> &KnowledgeGraph {
        &self.kg
    }

    pub fn kg_mut(&mut self) -> &mut KnowledgeGraph {
        &mut self.kg
    }

    pub fn agent(&self) -> ElementId {
        self.agent
    }

    pub fn library(&self) -> &[SkillSpec] {
        &self.library
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn world(&self) -> &World {
        self.executor.world()
    }

    /// Milliseconds since the Unix epoch on the session clock.
    pub fn now_ms(&self) -> Timestamp {
        self.epoch_ms + self.world().now_millis() as Timestamp
    }

    pub fn active(&self) -> Option<&EventRecord> {
        self.active.as_ref()
    }

    /// Remaining custom steps of the active task.
    pub fn remaining(&self) -> usize {
        self.executor.remaining()
    }

    pub fn stop_requested(&self) -> bool {
        self.stop_requested
    }

    /// The last finished Tasked event.
    pub fn last_processed(&self) -> Option<ElementId> {
        self.processed.checked_sub(1).map(|i| self.kg.tasked_ids()[i])
    }

    /// Tasked events not yet finished, oldest first (the active one included).
    pub fn pending(&self) -> &[ElementId] {
        &self.kg.tasked_ids()[self.processed..]
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none() && self.pending().is_empty()
    }

    pub fn outcomes(&self) -> &[TaskOutcome] {
        &self.outcomes
    }

    pub fn outcome_of(&self, task: ElementId) -> Option<&TaskOutcome> {
        self.outcomes.iter().rev().find(|o| o.task_id == task)
    }

    /// Starts buffering [`StreamMessage`]s for [`Session::take_stream`].
    pub fn enable_stream(&mut self) {
        self.stream.get_or_insert_with(Vec::new);
    }

    fn emit(&mut self, msg: StreamMessage) {
        if let Some(buf) = &mut self.stream {
            buf.push(msg);
        }
    }

    /// Messages produced since the last call.
    pub fn take_stream(&mut self) -> Vec<StreamMessage> {
        self.stream.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn summarize(&self, record: &EventRecord) -> TaskSummary {
        let status = self
            .outcome_of(record.event_id)
            .map(|o| o.status)
            .or_else(|| self.recorded_status(record.event_id));
        TaskSummary {
            event_id: record.event_id,
            time_stamp: format_timestamp(record.ts),
            ts: record.ts,
            signature: record.signature.clone().unwrap_or_default(),
            skill: record.skill.clone().unwrap_or_default(),
            status,
        }
    }

    /// Status stored in the graph, for tasks finished in an earlier session.
    fn recorded_status(&self, task: ElementId) -> Option<OutcomeStatus> {
        let obs = self.kg.latest_observation(task).ok()??;
        match obs.params.get(STATUS_KEY)?.as_str()? {
            "Succeeded" => Some(OutcomeStatus::Succeeded),
            "Failed" => Some(OutcomeStatus::Failed),
            "Stopped" => Some(OutcomeStatus::Stopped),
            _ => None,
        }
    }

    /// Records an action command as a Tasked event. Execution starts on a
    /// later cycle, after every earlier task.
    pub fn submit(&mut self, signature: &str, request: &TaskRequest) -> Result<ElementId, KgError> {
        let object = request.object_ref().and_then(|r| self.kg.find_object(r));
        let id = self.kg.insert_tasked(
            self.agent,
            signature,
            request.skill_name(),
            object,
            request.to_params(),
            self.now_ms(),
        )?;
        let record = self.kg.event(id)?;
        self.emit(StreamMessage::Event(self.summarize(&record)));
        Ok(id)
    }

    /// Preempts the active task (and drops queued ones) on the next cycle.
    pub fn request_stop(&mut self) {
        self.stop_requested = true;
    }

    /// Oldest unfinished Tasked event.
    pub fn poll(&self) -> Option<EventRecord> {
        let &id = self.pending().first()?;
        Some(self.kg.event(id).expect("tasked ids are events"))
    }

    /// Makes `event` the active task and loads its steps. Tasks that cannot
    /// be compiled finish as Failed immediately.
    pub fn schedule(&mut self, event: EventRecord) -> Result<(), ControllerError> {
        assert!(self.active.is_none(), "a task is already active");
        let compiled = TaskRequest::from_event(event.skill.as_deref().unwrap_or_default(), &event.params)
            .and_then(|r| r.compile(&self.kg));
        self.active = Some(event);
        match compiled {
            Ok(steps) if steps.is_empty() => self.finish(OutcomeStatus::Failed, "task has no steps".into()),
            Ok(steps) => {
                self.executor.start(steps);
                self.observe()
            }
            Err(detail) => self.finish(OutcomeStatus::Failed, detail),
        }
    }

    fn finish(&mut self, status: OutcomeStatus, detail: String) -> Result<(), ControllerError> {
        let task = self.active.take().expect("finish needs an active task");
        if self.executor.is_busy() {
            self.executor.abort();
        }
        self.record_outcome(task.event_id, status, detail)?;
        self.observe()
    }

    fn record_outcome(&mut self, task: ElementId, status: OutcomeStatus, detail: String) -> Result<(), ControllerError> {
        let ts = self.now_ms();
        let state = Attributes::from([
            (STATUS_KEY.to_owned(), AttrValue::Str(status.name().into())),
            (DETAIL_KEY.to_owned(), AttrValue::Str(detail.clone())),
        ]);
        self.kg.insert_observed(task, state, ts)?;
        debug_assert_eq!(self.kg.tasked_ids()[self.processed], task);
        self.processed += 1;
        let outcome = TaskOutcome {
            task_id: task,
            status,
            detail,
            ts,
        };
        self.outcomes.push(outcome.clone());
        self.emit(StreamMessage::Outcome(outcome));
        Ok(())
    }

    /// One Observed event per robot and brick, plus a world frame on the stream.
    pub fn observe(&mut self) -> Result<(), ControllerError> {
        let ts = self.now_ms();
        for obs in self.executor.world().observe() {
            if let Some(&subject) = self.subjects.get(&obs.subject) {
                self.kg.insert_observed(subject, obs.state, ts)?;
            }
        }
        let now = self.world().now_millis();
        self.next_observation_ms = now + self.observation_period_ms;
        self.emit(StreamMessage::World(self.world().frame()));
        Ok(())
    }

    fn handle_stop(&mut self) -> Result<(), ControllerError> {
        self.stop_requested = false;
        if self.active.is_some() {
            self.finish(OutcomeStatus::Stopped, "stopped by user".into())?;
        }
        while let Some(&id) = self.pending().first() {
            self.record_outcome(id, OutcomeStatus::Stopped, "stopped before start".into())?;
        }
        self.executor.plant_mut().world.cancel_motion();
        Ok(())
    }

    /// One control period: advance the world, handle stop, start the next
    /// task if idle, tick, and finalize the task once it settles.
    pub fn run_cycle(&mut self) -> Result<(), ControllerError> {
        self.executor.advance();
        if self.stop_requested {
            return self.handle_stop();
        }
        if self.active.is_none() {
            if let Some(event) = self.poll() {
                self.schedule(event)?;
                if self.active.is_none() {
                    return Ok(());
                }
            }
        }
        match self.executor.tick() {
            CycleStatus::Idle | CycleStatus::Running => {}
            CycleStatus::Succeeded => self.finish(OutcomeStatus::Succeeded, String::new())?,
            CycleStatus::Failed(detail) => self.finish(OutcomeStatus::Failed, detail)?,
        }
        if self.world().now_millis() >= self.next_observation_ms {
            self.observe()?;
        }
        Ok(())
    }

    /// Cycles until no task is active or queued. Returns false if the budget
    /// ran out first.
    pub fn run_until_idle(&mut self, max_cycles: usize) -> Result<bool, ControllerError> {
        for _ in 0..max_cycles {
            if self.is_idle() && !self.stop_requested {
                return Ok(true);
            }
            self.run_cycle()?;
        }
        Ok(self.is_idle())
    }

    /// Stops everything and restores the initial layout.
    pub fn reset_world(&mut self) -> Result<(), ControllerError> {
        self.handle_stop()?;
        self.executor.reset_world();
        self.observe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_timestamp;

    fn session() -> Session {
        let epoch = parse_timestamp("2024-Jul-12-12-00-00.000").unwrap();
        Session::new(Scene::default(), None, epoch).unwrap()
    }

    fn pickup(color: &str) -> TaskRequest {
        TaskRequest::PickupBrick {
            color: color.into(),
            offset: 3.0,
        }
    }

    #[test]
    fn registers_agent_objects_and_library() {
        let s = session();
        assert_eq!(s.kg().node(s.agent()).unwrap().name(), Some("Panda"));
        assert!(s.kg().find_object("blue_short").is_some());
        assert_eq!(s.kg().skill_kind("MOVE"), Some(SkillKind::Base));
        assert_eq!(s.kg().skill_kind("pickup_brick"), Some(SkillKind::Derived));
    }

    #[test]
    fn no_events_means_nothing_to_poll() {
        let mut s = session();
        assert!(s.poll().is_none());
        s.run_cycle().unwrap();
        assert!(s.outcomes().is_empty());
    }

    #[test]
    fn pickup_succeeds_and_locks() {
        let mut s = session();
        let id = s.submit("pickup_brick('red', offset=3)", &pickup("red")).unwrap();
        assert_eq!(s.poll().map(|e| e.event_id), Some(id));
        assert!(s.run_until_idle(2000).unwrap());
        assert_eq!(s.outcome_of(id).unwrap().status, OutcomeStatus::Succeeded);
        assert!(s.world().robot().latch.is_locked());
        assert_eq!(s.last_processed(), Some(id));
        let obs = s.kg().latest_observation(id).unwrap().unwrap();
        assert_eq!(obs.params["status"], AttrValue::Str("Succeeded".into()));
    }

    #[test]
    fn schedule_sets_counter_to_program_length() {
        let mut s = session();
        s.submit("pickup_brick('red', offset=3)", &pickup("red")).unwrap();
        let ev = s.poll().unwrap();
        s.schedule(ev).unwrap();
        assert_eq!(s.remaining(), 5);
    }

    #[test]
    fn tasks_run_in_submission_order() {
        let mut s = session();
        let a = s.submit("pickup_brick('red', offset=3)", &pickup("red")).unwrap();
        for _ in 0..5 {
            s.run_cycle().unwrap();
        }
        // arrives while `a` is running
        let b = s
            .submit(
                "move_hand(orientation=[0,0,0], translation=[0,0,5])",
                &TaskRequest::MoveHand {
                    orientation: [0.0; 3],
                    translation: [0.0, 0.0, 5.0],
                },
            )
            .unwrap();
        assert_eq!(s.active().unwrap().event_id, a);
        assert!(s.run_until_idle(4000).unwrap());
        let order: Vec<_> = s.outcomes().iter().map(|o| o.task_id).collect();
        assert_eq!(order, [a, b]);
        assert!(s.outcomes().iter().all(|o| o.status == OutcomeStatus::Succeeded));
    }

    #[test]
    fn unknown_library_skill_fails_immediately() {
        let mut s = session();
        let id = s
            .submit(
                "do_skill_from_library('frobnicate')",
                &TaskRequest::DoSkill {
                    name: "frobnicate".into(),
                    substitution: BTreeMap::new(),
                },
            )
            .unwrap();
        s.run_cycle().unwrap();
        let o = s.outcome_of(id).unwrap();
        assert_eq!(o.status, OutcomeStatus::Failed);
        assert!(o.detail.contains("frobnicate"));
        assert!(s.active().is_none());
    }

    #[test]
    fn stop_cancels_motion() {
        let mut s = session();
        let id = s
            .submit(
                "move_hand(orientation=[0,0,0], translation=[20,0,0])",
                &TaskRequest::MoveHand {
                    orientation: [0.0; 3],
                    translation: [20.0, 0.0, 0.0],
                },
            )
            .unwrap();
        let queued = s.submit("pickup_brick('red', offset=3)", &pickup("red")).unwrap();
        for _ in 0..5 {
            s.run_cycle().unwrap();
        }
        assert!(s.world().is_moving());
        s.request_stop();
        s.run_cycle().unwrap();
        assert!(!s.world().is_moving());
        assert_eq!(s.outcome_of(id).unwrap().status, OutcomeStatus::Stopped);
        assert_eq!(s.outcome_of(queued).unwrap().status, OutcomeStatus::Stopped);
        assert!(s.is_idle());
    }

    #[test]
    fn observations_follow_the_rate() {
        let mut s = session();
        s.enable_stream();
        let robot = s.agent();
        let before = s.kg().observation_chain(robot).unwrap().len();
        for _ in 0..20 {
            s.run_cycle().unwrap();
        }
        // one second at 5 Hz
        assert_eq!(s.kg().observation_chain(robot).unwrap().len() - before, 5);
        let frames = s.take_stream().into_iter().filter(|m| matches!(m, StreamMessage::World(_))).count();
        assert_eq!(frames, 5);
        assert!(s.take_stream().is_empty());
    }

    #[test]
    fn restored_graph_is_not_replayed() {
        let mut s = session();
        s.submit("pickup_brick('red', offset=3)", &pickup("red")).unwrap();
        s.run_until_idle(2000).unwrap();
        let doc = s.kg().to_document();
        let kg = KnowledgeGraph::from_document(&doc).unwrap();
        let latest = kg.latest_timestamp().unwrap();
        let epoch = parse_timestamp("2024-Jul-12-12-00-00.000").unwrap();
        let s2 = Session::new(Scene::default(), Some(kg), epoch).unwrap();
        assert!(s2.is_idle());
        assert!(s2.now_ms() > latest);
        assert_eq!(s2.kg().find_named(Label::Agent, "Panda"), Some(s.agent()));
        let task = s2.kg().last_n_tasked(1).pop().unwrap();
        assert_eq!(s2.summarize(&task).status, Some(OutcomeStatus::Succeeded));
    }
}
