use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::kg::{AttrValue, Attributes, KnowledgeGraph};
use crate::sim::euler_xyz_deg;
use crate::skills::{
    compile_drop_brick, compile_move_by_object, compile_move_hand, compile_pickup_brick, BaseSkillKind, SkillError,
    TaskStep,
};

const SUBST_PREFIX: &str = "subst:";

/// An action command as recorded on a Tasked event. Lengths are centimetres
/// and angles degrees, exactly as typed.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskRequest {
    PickupBrick { color: String, offset: f64 },
    DropBrick { orientation: [f64; 3], offset: f64 },
    MoveHand { orientation: [f64; 3], translation: [f64; 3] },
    MoveByObject { color: String, translation: [f64; 3] },
    DoSkill { name: String, substitution: BTreeMap<String, String> },
    /// Absolute tip pose (base MOVE).
    MoveTo { translation: [f64; 3], orientation: [f64; 3] },
    /// Actuate without waiting on the latch (base GRIPPER).
    Gripper { on: bool },
    /// Store an object's keypoint (base PERCEPTION).
    Locate { object: String },
}

fn nums(v: [f64; 3]) -> AttrValue {
    AttrValue::Nums(v.to_vec())
}

fn get_str(params: &Attributes, key: &str) -> Result<String, String> {
    params
        .get(key)
        .and_then(AttrValue::as_str)
        .map(str::to_owned)
        .ok_or_else(|| format!("task parameter `{key}` missing or not text"))
}

fn get_num(params: &Attributes, key: &str) -> Result<f64, String> {
    params
        .get(key)
        .and_then(AttrValue::as_num)
        .ok_or_else(|| format!("task parameter `{key}` missing or not a number"))
}

fn get_vec3(params: &Attributes, key: &str) -> Result<[f64; 3], String> {
    params
        .get(key)
        .and_then(AttrValue::as_nums)
        .and_then(|v| <[f64; 3]>::try_from(v).ok())
        .ok_or_else(|| format!("task parameter `{key}` missing or not a 3-vector"))
}

impl TaskRequest {
    /// Library name recorded as the event's skill.
    pub fn skill_name(&self) -> &str {
        match self {
            TaskRequest::PickupBrick { .. } => "pickup_brick",
            TaskRequest::DropBrick { .. } => "drop_brick",
            TaskRequest::MoveHand { .. } => "move_hand",
            TaskRequest::MoveByObject { .. } => "move_by_object",
            TaskRequest::DoSkill { name, .. } => name,
            TaskRequest::MoveTo { .. } => BaseSkillKind::Move.label(),
            TaskRequest::Gripper { .. } => BaseSkillKind::Gripper.label(),
            TaskRequest::Locate { .. } => BaseSkillKind::Perception.label(),
        }
    }

    /// The object the command names directly, if any.
    pub fn object_ref(&self) -> Option<&str> {
        match self {
            TaskRequest::PickupBrick { color, .. } | TaskRequest::MoveByObject { color, .. } => Some(color),
            TaskRequest::Locate { object } => Some(object),
            _ => None,
        }
    }

    pub fn to_params(&self) -> Attributes {
        let mut p = Attributes::new();
        let mut put = |k: &str, v: AttrValue| {
            p.insert(k.to_owned(), v);
        };
        match self {
            TaskRequest::PickupBrick { color, offset } => {
                put("color", AttrValue::Str(color.clone()));
                put("offset", AttrValue::Num(*offset));
            }
            TaskRequest::DropBrick { orientation, offset } => {
                put("orientation", nums(*orientation));
                put("offset", AttrValue::Num(*offset));
            }
            TaskRequest::MoveHand {
                orientation,
                translation,
            } => {
                put("orientation", nums(*orientation));
                put("translation", nums(*translation));
            }
            TaskRequest::MoveByObject { color, translation } => {
                put("color", AttrValue::Str(color.clone()));
                put("translation", nums(*translation));
            }
            TaskRequest::DoSkill { substitution, .. } => {
                for (from, to) in substitution {
                    put(&format!("{SUBST_PREFIX}{from}"), AttrValue::Str(to.clone()));
                }
            }
            TaskRequest::MoveTo {
                translation,
                orientation,
            } => {
                put("translation", nums(*translation));
                put("orientation", nums(*orientation));
            }
            TaskRequest::Gripper { on } => put("state", AttrValue::Str(if *on { "on" } else { "off" }.into())),
            TaskRequest::Locate { object } => put("object", AttrValue::Str(object.clone())),
        }
        p
    }

    /// Rebuilds the request from a Tasked event's skill and parameters.
    /// Names outside the built-in commands are library skills.
    pub fn from_event(skill: &str, params: &Attributes) -> Result<Self, String> {
        Ok(match skill {
            "pickup_brick" => TaskRequest::PickupBrick {
                color: get_str(params, "color")?,
                offset: get_num(params, "offset")?,
            },
            "drop_brick" => TaskRequest::DropBrick {
                orientation: get_vec3(params, "orientation")?,
                offset: get_num(params, "offset")?,
            },
            "move_hand" => TaskRequest::MoveHand {
                orientation: get_vec3(params, "orientation")?,
                translation: get_vec3(params, "translation")?,
            },
            "move_by_object" => TaskRequest::MoveByObject {
                color: get_str(params, "color")?,
                translation: get_vec3(params, "translation")?,
            },
            "MOVE" => TaskRequest::MoveTo {
                translation: get_vec3(params, "translation")?,
                orientation: get_vec3(params, "orientation")?,
            },
            "GRIPPER" => match get_str(params, "state")?.as_str() {
                "on" => TaskRequest::Gripper { on: true },
                "off" => TaskRequest::Gripper { on: false },
                other => return Err(format!("gripper state must be 'on' or 'off', got '{other}'")),
            },
            "PERCEPTION" => TaskRequest::Locate {
                object: get_str(params, "object")?,
            },
            name => {
                let mut substitution = BTreeMap::new();
                for (k, v) in params {
                    let Some(from) = k.strip_prefix(SUBST_PREFIX) else {
                        return Err(format!("unexpected parameter `{k}` for skill `{name}`"));
                    };
                    let to = v.as_str().ok_or_else(|| format!("substitution for `{from}` is not text"))?;
                    substitution.insert(from.to_owned(), to.to_owned());
                }
                TaskRequest::DoSkill {
                    name: name.to_owned(),
                    substitution,
                }
            }
        })
    }

    /// Steps for everything except library skills, which need the graph.
    pub fn compile_builtin(&self) -> Result<Option<Vec<TaskStep>>, SkillError> {
        Ok(Some(match self {
            TaskRequest::PickupBrick { color, offset } => compile_pickup_brick(color, *offset)?,
            TaskRequest::DropBrick { orientation, offset } => compile_drop_brick(*orientation, *offset)?,
            TaskRequest::MoveHand {
                orientation,
                translation,
            } => compile_move_hand(*orientation, *translation)?,
            TaskRequest::MoveByObject { color, translation } => compile_move_by_object(color, *translation)?,
            TaskRequest::MoveTo {
                translation,
                orientation,
            } => {
                if !translation.iter().chain(orientation).all(|x| x.is_finite()) {
                    return Err(SkillError::InvalidArgument {
                        name: "translation",
                        reason: "must be finite".into(),
                    });
                }
                vec![TaskStep::move_to(
                    Vector3::from(*translation) * 0.01,
                    euler_xyz_deg(*orientation),
                    None,
                )]
            }
            TaskRequest::Gripper { on } => vec![TaskStep::gripper(*on, None)],
            TaskRequest::Locate { object } => vec![TaskStep::perceive(object)],
            TaskRequest::DoSkill { .. } => return Ok(None),
        }))
    }

    pub fn compile(&self, kg: &KnowledgeGraph) -> Result<Vec<TaskStep>, String> {
        match self {
            TaskRequest::DoSkill { name, substitution } => kg.load_skill(name, substitution).map_err(|e| e.to_string()),
            other => Ok(other
                .compile_builtin()
                .map_err(|e| e.to_string())?
                .expect("built-in commands compile without the graph")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<TaskRequest> {
        vec![
            TaskRequest::PickupBrick {
                color: "red".into(),
                offset: 3.0,
            },
            TaskRequest::DropBrick {
                orientation: [0.0, 0.0, 90.0],
                offset: 3.0,
            },
            TaskRequest::MoveHand {
                orientation: [0.0, 0.0, -90.0],
                translation: [0.0, 20.0, 0.0],
            },
            TaskRequest::MoveByObject {
                color: "blue".into(),
                translation: [0.0, 0.0, -5.0],
            },
            TaskRequest::DoSkill {
                name: "TipOverBrick".into(),
                substitution: BTreeMap::from([("red".into(), "green".into())]),
            },
            TaskRequest::MoveTo {
                translation: [40.0, 0.0, 30.0],
                orientation: [0.0; 3],
            },
            TaskRequest::Gripper { on: true },
            TaskRequest::Locate { object: "red".into() },
        ]
    }

    #[test]
    fn params_round_trip() {
        for r in samples() {
            assert_eq!(TaskRequest::from_event(r.skill_name(), &r.to_params()), Ok(r.clone()));
        }
    }

    #[test]
    fn library_skill_with_foreign_param_rejected() {
        let params = Attributes::from([("color".to_owned(), AttrValue::Str("red".into()))]);
        assert!(TaskRequest::from_event("AlignBrick", &params).is_err());
    }

    #[test]
    fn pickup_compiles_to_five_steps() {
        let steps = samples()[0].compile(&KnowledgeGraph::new()).unwrap();
        assert_eq!(steps.len(), 5);
    }

    #[test]
    fn unknown_library_skill_fails_to_compile() {
        let err = samples()[4].compile(&KnowledgeGraph::new()).unwrap_err();
        assert!(err.contains("TipOverBrick"), "{err}");
    }
}
