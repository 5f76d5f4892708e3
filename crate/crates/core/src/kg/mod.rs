//! Skill-centric knowledge graph.
//!
//! An embedded property graph holding the robot (Agent), the bricks (Object),
//! time-stamped Tasked/Observed events (Event) and the skill library
//! (SkillNode). Observations of the same subject are chained in time order and
//! saved skills are stored as subgraphs: a root with one `HAS_STEP` child per
//! recorded task, each of which has one `HAS_CHILD` child per base-skill step.

mod persist;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Brick, Pose};
use crate::skills::{SkillError, TaskStep};

pub use persist::{format_timestamp, parse_timestamp};

pub type ElementId = u64;

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Agent,
    Object,
    Event,
    SkillNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Relation {
    AssignedTo,
    Targets,
    UsesSkill,
    ObservationOf,
    NextObservation,
    HasChild,
    HasStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Str(String),
    Num(f64),
    Time(Timestamp),
    Nums(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

impl AttrValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            AttrValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_nums(&self) -> Option<&[f64]> {
        match self {
            AttrValue::Nums(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Str(s) => f.write_str(s),
            AttrValue::Num(v) => write!(f, "{v}"),
            AttrValue::Time(t) => f.write_str(&format_timestamp(*t)),
            AttrValue::Nums(v) => write!(f, "{v:?}"),
            AttrValue::Points(v) => write!(f, "{v:?}"),
        }
    }
}

pub type Attributes = BTreeMap<String, AttrValue>;

pub const NAME: &str = "Name";
pub const TIME_STAMP: &str = "Time stamp";
pub const SIGNATURE: &str = "Signature";
pub const SKILL: &str = "Skill";
pub const KIND: &str = "Kind";
const PARAM_PREFIX: &str = "param:";
const STATE_PREFIX: &str = "state:";
const ORDINAL: &str = "ordinal";

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub element_id: ElementId,
    pub label: Label,
    pub attributes: Attributes,
}

impl GraphNode {
    pub fn name(&self) -> Option<&str> {
        self.attributes.get(NAME).and_then(AttrValue::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub src: ElementId,
    pub dst: ElementId,
    pub relation: Relation,
    pub attributes: Attributes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Tasked,
    Observed,
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Tasked => "Tasked",
            EventKind::Observed => "Observed",
        }
    }
}

/// An event node together with the context reachable from it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub event_id: ElementId,
    pub kind: EventKind,
    pub ts: Timestamp,
    /// The assigned agent (Tasked) or observed node (Observed).
    pub subject: ElementId,
    pub object_ref: Option<ElementId>,
    pub skill: Option<String>,
    pub signature: Option<String>,
    /// Command parameters (Tasked) or observed state (Observed).
    pub params: Attributes,
}

/// Kind tag of a skill-library root node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Base,
    Derived,
    Custom,
}

impl SkillKind {
    fn tag(self) -> &'static str {
        match self {
            SkillKind::Base => "base",
            SkillKind::Derived => "derived",
            SkillKind::Custom => "custom",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        [SkillKind::Base, SkillKind::Derived, SkillKind::Custom]
            .into_iter()
            .find(|k| k.tag() == tag)
    }
}

/// One recorded task inside a saved skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillSection {
    /// Skill the task used, e.g. `pickup_brick`.
    pub source: String,
    /// The original command text.
    pub signature: String,
    pub steps: Vec<TaskStep>,
}

/// Element ids of a stored skill subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillGraph {
    pub name: String,
    pub root: ElementId,
    /// `(section node, step nodes)` in order.
    pub sections: Vec<(ElementId, Vec<ElementId>)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KgError {
    #[error("no {0:?} node with id {1}")]
    UnknownNode(Label, ElementId),
    #[error("node {0} does not exist")]
    MissingNode(ElementId),
    #[error("timestamp {ts} precedes the latest event at {latest}")]
    NonMonotonic { ts: Timestamp, latest: Timestamp },
    #[error("skill `{0}` already exists")]
    DuplicateSkill(String),
    #[error("skill `{0}` has no steps")]
    EmptySkill(String),
    #[error("unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("skill `{0}` is a library primitive, not a recorded step list")]
    NotRecorded(String),
    #[error("substitution key `{key}` is not referenced by skill `{skill}`")]
    DanglingSubstitution { skill: String, key: String },
    #[error("node {0} is not an event")]
    NotAnEvent(ElementId),
    #[error("stored skill is corrupt: {0}")]
    CorruptSkill(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid graph document: {0}")]
    Invalid(String),
}

impl From<SkillError> for KgError {
    fn from(e: SkillError) -> Self {
        KgError::CorruptSkill(e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<ElementId, GraphNode>,
    edges: Vec<GraphEdge>,
    out_edges: HashMap<ElementId, Vec<usize>>,
    in_edges: HashMap<ElementId, Vec<usize>>,
    next_id: ElementId,
    latest_ts: Option<Timestamp>,
    tasked: Vec<ElementId>,
    first_obs: HashMap<ElementId, ElementId>,
    latest_obs: HashMap<ElementId, ElementId>,
    skills: BTreeMap<String, ElementId>,
}

fn points(ps: &[nalgebra::Vector3<f64>]) -> AttrValue {
    AttrValue::Points(ps.iter().map(|p| p.as_slice().to_vec()).collect())
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self {
            next_id: 1,
            ..Default::default()
        }
    }

    pub fn node(&self, id: ElementId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn latest_timestamp(&self) -> Option<Timestamp> {
        self.latest_ts
    }

    fn add_node(&mut self, label: Label, attributes: Attributes) -> ElementId {
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            GraphNode {
                element_id: id,
                label,
                attributes,
            },
        );
        id
    }

    fn add_edge(&mut self, src: ElementId, dst: ElementId, relation: Relation, attributes: Attributes) {
        let index = self.edges.len();
        self.edges.push(GraphEdge {
            src,
            dst,
            relation,
            attributes,
        });
        self.out_edges.entry(src).or_default().push(index);
        self.in_edges.entry(dst).or_default().push(index);
    }

    fn ordinal(i: usize) -> Attributes {
        Attributes::from([(ORDINAL.to_owned(), AttrValue::Num(i as f64))])
    }

    /// Targets of outgoing `relation` edges, in insertion order.
    pub fn out_neighbors(&self, id: ElementId, relation: Relation) -> impl Iterator<Item = ElementId> + '_ {
        self.out_edges
            .get(&id)
            .into_iter()
            .flatten()
            .map(|&i| &self.edges[i])
            .filter(move |e| e.relation == relation)
            .map(|e| e.dst)
    }

    pub fn in_neighbors(&self, id: ElementId, relation: Relation) -> impl Iterator<Item = ElementId> + '_ {
        self.in_edges
            .get(&id)
            .into_iter()
            .flatten()
            .map(|&i| &self.edges[i])
            .filter(move |e| e.relation == relation)
            .map(|e| e.src)
    }

    fn require(&self, id: ElementId, label: Label) -> Result<&GraphNode, KgError> {
        match self.nodes.get(&id) {
            Some(n) if n.label == label => Ok(n),
            _ => Err(KgError::UnknownNode(label, id)),
        }
    }

    fn check_ts(&self, ts: Timestamp) -> Result<(), KgError> {
        match self.latest_ts {
            Some(latest) if ts < latest => Err(KgError::NonMonotonic { ts, latest }),
            _ => Ok(()),
        }
    }

    pub fn add_agent(&mut self, name: &str, tip: &Pose) -> ElementId {
        let attrs = Attributes::from([
            (NAME.to_owned(), AttrValue::Str(name.to_owned())),
            ("Tip Orientation".to_owned(), AttrValue::Nums(tip.orientation_xyzw().to_vec())),
            ("Tip Translation".to_owned(), AttrValue::Nums(tip.translation.as_slice().to_vec())),
        ]);
        self.add_node(Label::Agent, attrs)
    }

    pub fn add_object(&mut self, brick: &Brick) -> ElementId {
        let attrs = Attributes::from([
            (NAME.to_owned(), AttrValue::Str(brick.name.clone())),
            ("Color".to_owned(), AttrValue::Str(brick.color.clone())),
            ("Centroid".to_owned(), AttrValue::Nums(brick.pose.translation.as_slice().to_vec())),
            ("Affordances".to_owned(), points(&brick.affordances)),
            ("Mesh".to_owned(), points(&brick.mesh)),
        ]);
        self.add_node(Label::Object, attrs)
    }

    /// First node with `label` whose Name equals `name`.
    pub fn find_named(&self, label: Label, name: &str) -> Option<ElementId> {
        self.nodes
            .values()
            .find(|n| n.label == label && n.name() == Some(name))
            .map(|n| n.element_id)
    }

    /// Object node by name, falling back to the first object with that colour.
    pub fn find_object(&self, object_ref: &str) -> Option<ElementId> {
        self.find_named(Label::Object, object_ref).or_else(|| {
            self.nodes
                .values()
                .find(|n| {
                    n.label == Label::Object
                        && n.attributes.get("Color").and_then(AttrValue::as_str) == Some(object_ref)
                })
                .map(|n| n.element_id)
        })
    }

    pub fn insert_tasked(
        &mut self,
        agent: ElementId,
        signature: &str,
        skill: &str,
        object_ref: Option<ElementId>,
        params: Attributes,
        ts: Timestamp,
    ) -> Result<ElementId, KgError> {
        self.require(agent, Label::Agent)?;
        if let Some(obj) = object_ref {
            self.require(obj, Label::Object)?;
        }
        self.check_ts(ts)?;
        let mut attrs = Attributes::from([
            (NAME.to_owned(), AttrValue::Str(EventKind::Tasked.name().into())),
            (TIME_STAMP.to_owned(), AttrValue::Time(ts)),
            (SIGNATURE.to_owned(), AttrValue::Str(signature.to_owned())),
            (SKILL.to_owned(), AttrValue::Str(skill.to_owned())),
        ]);
        attrs.extend(params.into_iter().map(|(k, v)| (format!("{PARAM_PREFIX}{k}"), v)));
        let id = self.add_node(Label::Event, attrs);
        self.add_edge(id, agent, Relation::AssignedTo, Attributes::new());
        if let Some(obj) = object_ref {
            self.add_edge(id, obj, Relation::Targets, Attributes::new());
        }
        if let Some(&skill_node) = self.skills.get(skill) {
            self.add_edge(id, skill_node, Relation::UsesSkill, Attributes::new());
        }
        self.latest_ts = Some(ts);
        self.tasked.push(id);
        Ok(id)
    }

    pub fn insert_observed(
        &mut self,
        subject: ElementId,
        state: Attributes,
        ts: Timestamp,
    ) -> Result<ElementId, KgError> {
        if !self.nodes.contains_key(&subject) {
            return Err(KgError::MissingNode(subject));
        }
        self.check_ts(ts)?;
        let mut attrs = Attributes::from([
            (NAME.to_owned(), AttrValue::Str(EventKind::Observed.name().into())),
            (TIME_STAMP.to_owned(), AttrValue::Time(ts)),
        ]);
        attrs.extend(state.into_iter().map(|(k, v)| (format!("{STATE_PREFIX}{k}"), v)));
        let id = self.add_node(Label::Event, attrs);
        self.add_edge(id, subject, Relation::ObservationOf, Attributes::new());
        if let Some(prev) = self.latest_obs.insert(subject, id) {
            self.add_edge(prev, id, Relation::NextObservation, Attributes::new());
        } else {
            self.first_obs.insert(subject, id);
        }
        self.latest_ts = Some(ts);
        Ok(id)
    }

    /// Reassembles an event from its node and outgoing edges.
    pub fn event(&self, id: ElementId) -> Result<EventRecord, KgError> {
        let node = self.nodes.get(&id).ok_or(KgError::MissingNode(id))?;
        if node.label != Label::Event {
            return Err(KgError::NotAnEvent(id));
        }
        let kind = match node.name() {
            Some("Tasked") => EventKind::Tasked,
            Some("Observed") => EventKind::Observed,
            _ => return Err(KgError::NotAnEvent(id)),
        };
        let ts = match node.attributes.get(TIME_STAMP) {
            Some(AttrValue::Time(t)) => *t,
            _ => return Err(KgError::NotAnEvent(id)),
        };
        let (subject_rel, prefix) = match kind {
            EventKind::Tasked => (Relation::AssignedTo, PARAM_PREFIX),
            EventKind::Observed => (Relation::ObservationOf, STATE_PREFIX),
        };
        let subject = self
            .out_neighbors(id, subject_rel)
            .next()
            .ok_or(KgError::NotAnEvent(id))?;
        let params = node
            .attributes
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|k| (k.to_owned(), v.clone())))
            .collect();
        Ok(EventRecord {
            event_id: id,
            kind,
            ts,
            subject,
            object_ref: self.out_neighbors(id, Relation::Targets).next(),
            skill: node.attributes.get(SKILL).and_then(AttrValue::as_str).map(str::to_owned),
            signature: node
                .attributes
                .get(SIGNATURE)
                .and_then(AttrValue::as_str)
                .map(str::to_owned),
            params,
        })
    }

    pub fn latest_observation(&self, subject: ElementId) -> Result<Option<EventRecord>, KgError> {
        if !self.nodes.contains_key(&subject) {
            return Err(KgError::MissingNode(subject));
        }
        self.latest_obs.get(&subject).map(|&id| self.event(id)).transpose()
    }

    /// Walks `NEXT_OBSERVATION` from the first observation of `subject`.
    pub fn observation_chain(&self, subject: ElementId) -> Result<Vec<EventRecord>, KgError> {
        if !self.nodes.contains_key(&subject) {
            return Err(KgError::MissingNode(subject));
        }
        let mut out = Vec::new();
        let mut cursor = self.first_obs.get(&subject).copied();
        while let Some(id) = cursor {
            out.push(self.event(id)?);
            cursor = self.out_neighbors(id, Relation::NextObservation).next();
        }
        Ok(out)
    }

    /// The `min(n, total)` most recent Tasked events, oldest first.
    pub fn last_n_tasked(&self, n: usize) -> Vec<EventRecord> {
        let start = self.tasked.len().saturating_sub(n);
        self.tasked[start..]
            .iter()
            .map(|&id| self.event(id).expect("tasked index holds events"))
            .collect()
    }

    pub fn tasked_count(&self) -> usize {
        self.tasked.len()
    }

    /// Tasked event ids in insertion order.
    pub fn tasked_ids(&self) -> &[ElementId] {
        &self.tasked
    }

    /// Adds a library primitive (base or derived skill) as a single node.
    pub fn register_skill(&mut self, name: &str, kind: SkillKind, parameters: Attributes) -> Result<ElementId, KgError> {
        if self.skills.contains_key(name) {
            return Err(KgError::DuplicateSkill(name.to_owned()));
        }
        let mut attrs = parameters;
        attrs.insert(NAME.into(), AttrValue::Str(name.to_owned()));
        attrs.insert(KIND.into(), AttrValue::Str(kind.tag().into()));
        let id = self.add_node(Label::SkillNode, attrs);
        self.skills.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn skill_names(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub fn skill_kind(&self, name: &str) -> Option<SkillKind> {
        let node = self.nodes.get(self.skills.get(name)?)?;
        SkillKind::from_tag(node.attributes.get(KIND)?.as_str()?)
    }

    pub fn save_skill(&mut self, name: &str, sections: &[SkillSection]) -> Result<SkillGraph, KgError> {
        if self.skills.contains_key(name) {
            return Err(KgError::DuplicateSkill(name.to_owned()));
        }
        if sections.iter().all(|s| s.steps.is_empty()) {
            return Err(KgError::EmptySkill(name.to_owned()));
        }
        let root = self.register_skill(name, SkillKind::Custom, Attributes::new())?;
        let mut graph = SkillGraph {
            name: name.to_owned(),
            root,
            sections: Vec::new(),
        };
        for (i, section) in sections.iter().enumerate() {
            let attrs = Attributes::from([
                (NAME.to_owned(), AttrValue::Str(section.source.clone())),
                (KIND.to_owned(), AttrValue::Str("composite".into())),
                (SIGNATURE.to_owned(), AttrValue::Str(section.signature.clone())),
            ]);
            let node = self.add_node(Label::SkillNode, attrs);
            self.add_edge(root, node, Relation::HasStep, Self::ordinal(i));
            let mut children = Vec::new();
            for (j, step) in section.steps.iter().enumerate() {
                let child = self.add_node(Label::SkillNode, step.to_attributes());
                self.add_edge(node, child, Relation::HasChild, Self::ordinal(j));
                children.push(child);
            }
            graph.sections.push((node, children));
        }
        Ok(graph)
    }

    fn ordered_children(&self, id: ElementId, relation: Relation) -> Result<Vec<ElementId>, KgError> {
        let mut kids = Vec::new();
        for &i in self.out_edges.get(&id).into_iter().flatten() {
            let e = &self.edges[i];
            if e.relation != relation {
                continue;
            }
            let ord = e
                .attributes
                .get(ORDINAL)
                .and_then(AttrValue::as_num)
                .ok_or_else(|| KgError::CorruptSkill(format!("edge {}→{} lacks an ordinal", e.src, e.dst)))?;
            kids.push((ord, e.dst));
        }
        kids.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(kids.into_iter().map(|(_, id)| id).collect())
    }

    /// Recorded sections of a saved skill.
    pub fn skill_sections(&self, name: &str) -> Result<Vec<SkillSection>, KgError> {
        let &root = self
            .skills
            .get(name)
            .ok_or_else(|| KgError::UnknownSkill(name.to_owned()))?;
        if self.skill_kind(name) != Some(SkillKind::Custom) {
            return Err(KgError::NotRecorded(name.to_owned()));
        }
        let mut sections = Vec::new();
        for section in self.ordered_children(root, Relation::HasStep)? {
            let node = &self.nodes[&section];
            let text = |k: &str| node.attributes.get(k).and_then(AttrValue::as_str).unwrap_or_default().to_owned();
            let steps = self
                .ordered_children(section, Relation::HasChild)?
                .into_iter()
                .map(|id| TaskStep::from_attributes(&self.nodes[&id].attributes))
                .collect::<Result<Vec<_>, _>>()?;
            sections.push(SkillSection {
                source: text(NAME),
                signature: text(SIGNATURE),
                steps,
            });
        }
        Ok(sections)
    }

    /// Flattened steps of a saved skill with object references rewritten.
    /// Every substitution key must be referenced by the skill.
    pub fn load_skill(&self, name: &str, substitution: &BTreeMap<String, String>) -> Result<Vec<TaskStep>, KgError> {
        let steps: Vec<TaskStep> = self
            .skill_sections(name)?
            .into_iter()
            .flat_map(|s| s.steps)
            .collect();
        for key in substitution.keys() {
            if !steps.iter().any(|s| s.object_refs().contains(&key.as_str())) {
                return Err(KgError::DanglingSubstitution {
                    skill: name.to_owned(),
                    key: key.clone(),
                });
            }
        }
        Ok(steps.iter().map(|s| s.substitute(substitution)).collect())
    }

    pub fn snapshot(&self, path: impl AsRef<Path>) -> Result<(), KgError> {
        std::fs::write(path, self.to_document()).map_err(|e| KgError::Io(e.to_string()))
    }

    pub fn restore(path: impl AsRef<Path>) -> Result<Self, KgError> {
        let text = std::fs::read_to_string(path).map_err(|e| KgError::Io(e.to_string()))?;
        Self::from_document(&text)
    }

    /// Rebuilds the derived indexes after loading nodes and edges.
    fn from_parts(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>) -> Result<Self, KgError> {
        let mut g = KnowledgeGraph::new();
        for node in nodes {
            let id = node.element_id;
            if g.nodes.insert(id, node).is_some() {
                return Err(KgError::Invalid(format!("duplicate element_id {id}")));
            }
            g.next_id = g.next_id.max(id + 1);
        }
        for e in edges {
            for end in [e.src, e.dst] {
                if !g.nodes.contains_key(&end) {
                    return Err(KgError::Invalid(format!("edge endpoint {end} does not exist")));
                }
            }
            g.add_edge(e.src, e.dst, e.relation, e.attributes);
        }
        let mut tasked = Vec::new();
        let mut events: Vec<(Timestamp, ElementId)> = Vec::new();
        for n in g.nodes.values() {
            match (n.label, n.name()) {
                (Label::Event, Some(kind @ ("Tasked" | "Observed"))) => {
                    let Some(AttrValue::Time(ts)) = n.attributes.get(TIME_STAMP) else {
                        return Err(KgError::Invalid(format!("event {} has no time stamp", n.element_id)));
                    };
                    events.push((*ts, n.element_id));
                    if kind == "Tasked" {
                        tasked.push((*ts, n.element_id));
                    }
                }
                (Label::SkillNode, Some(name)) => {
                    let kind = n.attributes.get(KIND).and_then(AttrValue::as_str);
                    if kind.and_then(SkillKind::from_tag).is_some() {
                        g.skills.insert(name.to_owned(), n.element_id);
                    }
                }
                _ => {}
            }
        }
        tasked.sort();
        g.tasked = tasked.into_iter().map(|(_, id)| id).collect();
        g.latest_ts = events.iter().map(|(ts, _)| *ts).max();
        for e in &g.edges {
            if e.relation == Relation::ObservationOf {
                let has_prev = g.in_neighbors(e.src, Relation::NextObservation).next().is_some();
                let has_next = g.out_neighbors(e.src, Relation::NextObservation).next().is_some();
                if !has_prev {
                    g.first_obs.insert(e.dst, e.src);
                }
                if !has_next {
                    g.latest_obs.insert(e.dst, e.src);
                }
            }
        }
        Ok(g)
    }
}
