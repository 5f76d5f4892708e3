use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::kg::{AttrValue, Attributes};

use super::SkillError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaseSkillKind {
    Move,
    Gripper,
    Perception,
}

impl BaseSkillKind {
    /// Chooser order.
    pub const ALL: [BaseSkillKind; 3] = [BaseSkillKind::Move, BaseSkillKind::Gripper, BaseSkillKind::Perception];

    pub fn label(self) -> &'static str {
        match self {
            BaseSkillKind::Move => "MOVE",
            BaseSkillKind::Gripper => "GRIPPER",
            BaseSkillKind::Perception => "PERCEPTION",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BaseSkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Task label as stored in a program; anything but the three base kinds is
/// carried through so the custom-skill node can reject it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Base(BaseSkillKind),
    Other(String),
}

impl TaskKind {
    pub fn label(&self) -> &str {
        match self {
            TaskKind::Base(k) => k.label(),
            TaskKind::Other(s) => s,
        }
    }

    pub fn parse(label: &str) -> Self {
        BaseSkillKind::from_label(label).map_or_else(|| TaskKind::Other(label.to_owned()), TaskKind::Base)
    }
}

/// Where a MOVE step goes. Everything except `Absolute` is resolved against
/// the blackboard and tip at the moment the step is set up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum MoveTarget {
    Absolute {
        translation: Vector3<f64>,
        orientation: UnitQuaternion<f64>,
    },
    /// Offset from the keypoint stored by a PERCEPTION step on `object_ref`.
    Anchored {
        object_ref: String,
        offset: Vector3<f64>,
        orientation: Option<UnitQuaternion<f64>>,
    },
    /// Displacement from the tip; orientation defaults to the current one.
    Relative {
        delta: Vector3<f64>,
        orientation: Option<UnitQuaternion<f64>>,
    },
    /// Lower the held object so its bottom sits `clearance` metres above the table.
    Place {
        clearance: f64,
        orientation: Option<UnitQuaternion<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveData {
    pub target: MoveTarget,
    /// Seconds; `None` uses the cruise-speed heuristic.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaitFor {
    Locked,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperData {
    pub on: bool,
    pub wait_for: Option<WaitFor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionData {
    pub object_ref: String,
    pub store_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepData {
    Move(MoveData),
    Gripper(GripperData),
    Perception(PerceptionData),
    /// Payload of a task kind this build does not know.
    Opaque(Attributes),
}

/// One parameterized base-skill invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStep {
    pub kind: TaskKind,
    pub data: StepData,
}

/// Board key under which PERCEPTION stores the keypoint of `object_ref`.
pub fn keypoint_key(object_ref: &str) -> String {
    format!("keypoint:{object_ref}")
}

impl TaskStep {
    pub fn move_to(translation: Vector3<f64>, orientation: UnitQuaternion<f64>, duration: Option<f64>) -> Self {
        Self::moving(MoveTarget::Absolute { translation, orientation }, duration)
    }

    pub fn move_anchored(object_ref: &str, offset: Vector3<f64>, orientation: Option<UnitQuaternion<f64>>) -> Self {
        Self::moving(
            MoveTarget::Anchored {
                object_ref: object_ref.to_owned(),
                offset,
                orientation,
            },
            None,
        )
    }

    pub fn move_relative(delta: Vector3<f64>, orientation: Option<UnitQuaternion<f64>>) -> Self {
        Self::moving(MoveTarget::Relative { delta, orientation }, None)
    }

    pub fn place(clearance: f64, orientation: Option<UnitQuaternion<f64>>) -> Self {
        Self::moving(MoveTarget::Place { clearance, orientation }, None)
    }

    pub fn moving(target: MoveTarget, duration: Option<f64>) -> Self {
        Self {
            kind: TaskKind::Base(BaseSkillKind::Move),
            data: StepData::Move(MoveData { target, duration }),
        }
    }

    pub fn gripper(on: bool, wait_for: Option<WaitFor>) -> Self {
        Self {
            kind: TaskKind::Base(BaseSkillKind::Gripper),
            data: StepData::Gripper(GripperData { on, wait_for }),
        }
    }

    pub fn perceive(object_ref: &str) -> Self {
        Self {
            kind: TaskKind::Base(BaseSkillKind::Perception),
            data: StepData::Perception(PerceptionData {
                object_ref: object_ref.to_owned(),
                store_key: keypoint_key(object_ref),
            }),
        }
    }

    pub fn other(label: &str) -> Self {
        Self {
            kind: TaskKind::Other(label.to_owned()),
            data: StepData::Opaque(Attributes::new()),
        }
    }

    pub fn base_kind(&self) -> Option<BaseSkillKind> {
        match self.kind {
            TaskKind::Base(k) => Some(k),
            TaskKind::Other(_) => None,
        }
    }

    /// Data matches the declared kind.
    pub fn is_well_formed(&self) -> bool {
        matches!(
            (&self.kind, &self.data),
            (TaskKind::Base(BaseSkillKind::Move), StepData::Move(_))
                | (TaskKind::Base(BaseSkillKind::Gripper), StepData::Gripper(_))
                | (TaskKind::Base(BaseSkillKind::Perception), StepData::Perception(_))
                | (TaskKind::Other(_), StepData::Opaque(_))
        )
    }

    /// Symbolic object references used by this step.
    pub fn object_refs(&self) -> Vec<&str> {
        match &self.data {
            StepData::Move(MoveData {
                target: MoveTarget::Anchored { object_ref, .. },
                ..
            }) => vec![object_ref.as_str()],
            StepData::Perception(p) => vec![p.object_ref.as_str()],
            _ => Vec::new(),
        }
    }

    /// Rewrites object references. Keypoint keys derived from a reference
    /// follow it.
    pub fn substitute(&self, map: &BTreeMap<String, String>) -> TaskStep {
        let mut out = self.clone();
        match &mut out.data {
            StepData::Move(MoveData {
                target: MoveTarget::Anchored { object_ref, .. },
                ..
            }) => {
                if let Some(new) = map.get(object_ref.as_str()) {
                    *object_ref = new.clone();
                }
            }
            StepData::Perception(p) => {
                if let Some(new) = map.get(&p.object_ref) {
                    if p.store_key == keypoint_key(&p.object_ref) {
                        p.store_key = keypoint_key(new);
                    }
                    p.object_ref = new.clone();
                }
            }
            _ => {}
        }
        out
    }

    pub fn to_attributes(&self) -> Attributes {
        let mut a = Attributes::new();
        a.insert("Name".into(), AttrValue::Str(self.kind.label().to_owned()));
        a.insert("Kind".into(), AttrValue::Str("action".into()));
        let vec3 = |v: &Vector3<f64>| AttrValue::Nums(v.as_slice().to_vec());
        let quat = |q: &UnitQuaternion<f64>| {
            let q = q.quaternion();
            AttrValue::Nums(vec![q.i, q.j, q.k, q.w])
        };
        match &self.data {
            StepData::Move(m) => {
                let (target, orientation) = match &m.target {
                    MoveTarget::Absolute { translation, orientation } => {
                        a.insert("Translation".into(), vec3(translation));
                        ("absolute", Some(orientation))
                    }
                    MoveTarget::Anchored { object_ref, offset, orientation } => {
                        a.insert("Object".into(), AttrValue::Str(object_ref.clone()));
                        a.insert("Offset".into(), vec3(offset));
                        ("anchored", orientation.as_ref())
                    }
                    MoveTarget::Relative { delta, orientation } => {
                        a.insert("Delta".into(), vec3(delta));
                        ("relative", orientation.as_ref())
                    }
                    MoveTarget::Place { clearance, orientation } => {
                        a.insert("Clearance".into(), AttrValue::Num(*clearance));
                        ("place", orientation.as_ref())
                    }
                };
                a.insert("Target".into(), AttrValue::Str(target.into()));
                if let Some(q) = orientation {
                    a.insert("Orientation".into(), quat(q));
                }
                if let Some(d) = m.duration {
                    a.insert("Duration".into(), AttrValue::Num(d));
                }
            }
            StepData::Gripper(g) => {
                a.insert("On".into(), AttrValue::Num(if g.on { 1.0 } else { 0.0 }));
                let wait = match g.wait_for {
                    None => "none",
                    Some(WaitFor::Locked) => "Locked",
                    Some(WaitFor::Free) => "Free",
                };
                a.insert("Wait For".into(), AttrValue::Str(wait.into()));
            }
            StepData::Perception(p) => {
                a.insert("Object".into(), AttrValue::Str(p.object_ref.clone()));
                a.insert("Store Key".into(), AttrValue::Str(p.store_key.clone()));
            }
            StepData::Opaque(extra) => {
                for (k, v) in extra {
                    a.entry(k.clone()).or_insert_with(|| v.clone());
                }
            }
        }
        a
    }

    pub fn from_attributes(attrs: &Attributes) -> Result<TaskStep, SkillError> {
        let kind = TaskKind::parse(str_attr(attrs, "Name")?);
        let data = match kind {
            TaskKind::Base(BaseSkillKind::Move) => {
                let orientation = attrs.get("Orientation").map(|_| quat_attr(attrs, "Orientation")).transpose()?;
                let target = match str_attr(attrs, "Target")? {
                    "absolute" => MoveTarget::Absolute {
                        translation: vec3_attr(attrs, "Translation")?,
                        orientation: orientation.ok_or_else(|| bad("Orientation", "required for absolute moves"))?,
                    },
                    "anchored" => MoveTarget::Anchored {
                        object_ref: str_attr(attrs, "Object")?.to_owned(),
                        offset: vec3_attr(attrs, "Offset")?,
                        orientation,
                    },
                    "relative" => MoveTarget::Relative {
                        delta: vec3_attr(attrs, "Delta")?,
                        orientation,
                    },
                    "place" => MoveTarget::Place {
                        clearance: num_attr(attrs, "Clearance")?,
                        orientation,
                    },
                    other => return Err(bad("Target", &format!("unknown move target `{other}`"))),
                };
                let duration = attrs.get("Duration").map(|_| num_attr(attrs, "Duration")).transpose()?;
                StepData::Move(MoveData { target, duration })
            }
            TaskKind::Base(BaseSkillKind::Gripper) => StepData::Gripper(GripperData {
                on: num_attr(attrs, "On")? != 0.0,
                wait_for: match str_attr(attrs, "Wait For")? {
                    "none" => None,
                    "Locked" => Some(WaitFor::Locked),
                    "Free" => Some(WaitFor::Free),
                    other => return Err(bad("Wait For", &format!("unknown latch state `{other}`"))),
                },
            }),
            TaskKind::Base(BaseSkillKind::Perception) => StepData::Perception(PerceptionData {
                object_ref: str_attr(attrs, "Object")?.to_owned(),
                store_key: str_attr(attrs, "Store Key")?.to_owned(),
            }),
            TaskKind::Other(_) => {
                let mut extra = attrs.clone();
                extra.remove("Name");
                extra.remove("Kind");
                StepData::Opaque(extra)
            }
        };
        Ok(TaskStep { kind, data })
    }
}

fn bad(field: &str, message: &str) -> SkillError {
    SkillError::StepEncoding(format!("{field}: {message}"))
}

fn str_attr<'a>(attrs: &'a Attributes, key: &str) -> Result<&'a str, SkillError> {
    match attrs.get(key) {
        Some(AttrValue::Str(s)) => Ok(s),
        Some(_) => Err(bad(key, "expected a string")),
        None => Err(bad(key, "missing")),
    }
}

fn num_attr(attrs: &Attributes, key: &str) -> Result<f64, SkillError> {
    match attrs.get(key) {
        Some(AttrValue::Num(v)) => Ok(*v),
        Some(_) => Err(bad(key, "expected a number")),
        None => Err(bad(key, "missing")),
    }
}

fn nums_attr<'a>(attrs: &'a Attributes, key: &str, len: usize) -> Result<&'a [f64], SkillError> {
    match attrs.get(key) {
        Some(AttrValue::Nums(v)) if v.len() == len => Ok(v),
        Some(_) => Err(bad(key, &format!("expected {len} numbers"))),
        None => Err(bad(key, "missing")),
    }
}

fn vec3_attr(attrs: &Attributes, key: &str) -> Result<Vector3<f64>, SkillError> {
    Ok(Vector3::from_column_slice(nums_attr(attrs, key, 3)?))
}

fn quat_attr(attrs: &Attributes, key: &str) -> Result<UnitQuaternion<f64>, SkillError> {
    let q = nums_attr(attrs, key, 4)?;
    // Stored quaternions are already unit; keep the components bit-exact.
    Ok(UnitQuaternion::new_unchecked(Quaternion::new(q[3], q[0], q[1], q[2])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<TaskStep> {
        vec![
            TaskStep::move_to(
                Vector3::new(0.1, 0.2, 0.3),
                UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
                Some(1.5),
            ),
            TaskStep::move_anchored("red", Vector3::new(0.0, 0.0, 0.03), None),
            TaskStep::move_relative(Vector3::new(0.0, 0.2, 0.0), Some(UnitQuaternion::identity())),
            TaskStep::place(0.03, None),
            TaskStep::gripper(true, Some(WaitFor::Locked)),
            TaskStep::gripper(false, None),
            TaskStep::perceive("blue"),
            TaskStep::other("DANCE"),
        ]
    }

    #[test]
    fn attribute_encoding_round_trips() {
        for step in samples() {
            assert!(step.is_well_formed());
            let back = TaskStep::from_attributes(&step.to_attributes()).unwrap();
            assert_eq!(back, step);
        }
    }

    #[test]
    fn substitution_rewrites_refs_and_derived_keys() {
        let map = BTreeMap::from([("red".to_owned(), "green".to_owned())]);
        let p = TaskStep::perceive("red").substitute(&map);
        assert_eq!(p, TaskStep::perceive("green"));
        let m = TaskStep::move_anchored("red", Vector3::zeros(), None).substitute(&map);
        assert_eq!(m.object_refs(), vec!["green"]);
        let untouched = TaskStep::perceive("blue");
        assert_eq!(untouched.substitute(&map), untouched);
    }

    #[test]
    fn unknown_label_parses_as_other() {
        assert_eq!(TaskKind::parse("MOVE"), TaskKind::Base(BaseSkillKind::Move));
        assert_eq!(TaskKind::parse("FLY"), TaskKind::Other("FLY".into()));
    }
}
