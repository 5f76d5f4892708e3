use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use super::parse::{parse, Command, ParseError, Value};
use crate::controller::{Session, TaskRequest};
use crate::kg::{ElementId, SkillKind, SkillSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Text,
    Number,
    /// Non-negative integer.
    Count,
    Vec3,
    Map,
}

impl ParamType {
    fn name(self) -> &'static str {
        match self {
            ParamType::Text => "string",
            ParamType::Number => "number",
            ParamType::Count => "non-negative integer",
            ParamType::Vec3 => "array of 3 numbers",
            ParamType::Map => "map of strings",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match (self, v) {
            (ParamType::Text, Value::Str(_)) | (ParamType::Number, Value::Num(_)) | (ParamType::Map, Value::Map(_)) => {
                true
            }
            (ParamType::Count, Value::Num(n)) => *n >= 0.0 && n.fract() == 0.0 && *n <= u32::MAX as f64,
            (ParamType::Vec3, Value::Array(items)) => items.len() == 3 && items.iter().all(|x| x.as_num().is_some()),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Fallback {
    Required,
    Num(f64),
    Vec3([f64; 3]),
    EmptyMap,
}

type Param = (&'static str, ParamType, Fallback);

pub struct CommandSpec {
    pub name: &'static str,
    params: &'static [Param],
    /// Inserts a Tasked event.
    pub action: bool,
}

use Fallback::{EmptyMap, Num, Required};
use ParamType::{Count, Map, Number, Text};

const ZERO3: Fallback = Fallback::Vec3([0.0; 3]);

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "pickup_brick",
        params: &[("color", Text, Required), ("offset", Number, Num(3.0))],
        action: true,
    },
    CommandSpec {
        name: "drop_brick",
        params: &[("orientation", ParamType::Vec3, ZERO3), ("offset", Number, Num(3.0))],
        action: true,
    },
    CommandSpec {
        name: "move_hand",
        params: &[("orientation", ParamType::Vec3, ZERO3), ("translation", ParamType::Vec3, ZERO3)],
        action: true,
    },
    CommandSpec {
        name: "move_by_object",
        params: &[("color", Text, Required), ("translation", ParamType::Vec3, ZERO3)],
        action: true,
    },
    CommandSpec {
        name: "do_skill_from_library",
        params: &[("name", Text, Required), ("substitution", Map, EmptyMap)],
        action: true,
    },
    CommandSpec {
        name: "save_last_n_tasks",
        params: &[("name", Text, Required), ("n", Count, Required)],
        action: false,
    },
    CommandSpec {
        name: "show_last_n_tasks",
        params: &[("n", Count, Num(10.0))],
        action: false,
    },
    CommandSpec {
        name: "list_skills",
        params: &[],
        action: false,
    },
    CommandSpec {
        name: "stop",
        params: &[],
        action: false,
    },
    CommandSpec {
        name: "reset_world",
        params: &[],
        action: false,
    },
    CommandSpec {
        name: "move_to",
        params: &[("translation", ParamType::Vec3, Required), ("orientation", ParamType::Vec3, ZERO3)],
        action: true,
    },
    CommandSpec {
        name: "gripper",
        params: &[("state", Text, Required)],
        action: true,
    },
    CommandSpec {
        name: "locate",
        params: &[("object", Text, Required)],
        action: true,
    },
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommandError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unknown command `{name}`{}", suggest(.suggestions))]
    UnknownCommand { name: String, suggestions: Vec<String> },
    #[error("{command}: {message}")]
    Argument { command: String, message: String },
    #[error("only {available} tasks recorded, cannot use the last {requested}")]
    History { requested: usize, available: usize },
    #[error("{0}")]
    Skill(String),
    #[error("{0}")]
    Internal(String),
}

fn suggest(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean {}?", s.join(", "))
    }
}

/// Wire form of a [`CommandError`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<String>,
}

impl From<&CommandError> for ErrorBody {
    fn from(e: &CommandError) -> Self {
        let mut body = ErrorBody {
            kind: "",
            message: e.to_string(),
            offset: None,
            expected: Vec::new(),
            suggestions: Vec::new(),
        };
        body.kind = match e {
            CommandError::Parse(p) => {
                body.offset = Some(p.offset());
                if let ParseError::Syntax { expected, .. } = p {
                    body.expected = expected.clone();
                }
                "parse"
            }
            CommandError::UnknownCommand { suggestions, .. } => {
                body.suggestions = suggestions.clone();
                "unknown_command"
            }
            CommandError::Argument { .. } => "argument",
            CommandError::History { .. } => "history",
            CommandError::Skill(_) => "skill",
            CommandError::Internal(_) => "internal",
        };
        body
    }
}

/// `{"event_id": ..}`, `{"result": ..}` or `{"error": ..}` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    EventId(ElementId),
    Result(serde_json::Value),
    Error(ErrorBody),
}

impl From<Result<Response, CommandError>> for Response {
    fn from(r: Result<Response, CommandError>) -> Self {
        r.unwrap_or_else(|e| Response::Error((&e).into()))
    }
}

fn spec(name: &str) -> Result<&'static CommandSpec, CommandError> {
    COMMANDS.iter().find(|c| c.name == name).ok_or_else(|| {
        let mut close: Vec<(usize, &str)> = COMMANDS
            .iter()
            .map(|c| (strsim::levenshtein(name, c.name), c.name))
            .filter(|(d, c)| *d <= 3 || c.starts_with(name) || name.starts_with(c))
            .collect();
        close.sort();
        let suggestions = if close.is_empty() {
            COMMANDS.iter().map(|c| c.name.to_owned()).collect()
        } else {
            close.into_iter().map(|(_, c)| c.to_owned()).collect()
        };
        CommandError::UnknownCommand {
            name: name.to_owned(),
            suggestions,
        }
    })
}

struct Args<'a> {
    command: &'a str,
    values: BTreeMap<&'static str, Value>,
}

impl Args<'_> {
    fn text(&self, key: &str) -> String {
        self.values[key].as_str().expect("type-checked").to_owned()
    }

    fn num(&self, key: &str) -> f64 {
        self.values[key].as_num().expect("type-checked")
    }

    fn vec3(&self, key: &str) -> [f64; 3] {
        let Value::Array(items) = &self.values[key] else {
            unreachable!("type-checked")
        };
        std::array::from_fn(|i| items[i].as_num().expect("type-checked"))
    }

    fn map(&self, key: &str) -> BTreeMap<String, String> {
        match &self.values[key] {
            Value::Map(m) => m.clone(),
            _ => unreachable!("type-checked"),
        }
    }

    fn error(&self, message: impl Into<String>) -> CommandError {
        CommandError::Argument {
            command: self.command.to_owned(),
            message: message.into(),
        }
    }
}

fn bind<'a>(cmd: &'a Command, spec: &CommandSpec) -> Result<Args<'a>, CommandError> {
    let err = |message: String| CommandError::Argument {
        command: cmd.name.clone(),
        message,
    };
    if cmd.positional.len() > spec.params.len() {
        return Err(err(format!(
            "takes at most {} arguments, got {}",
            spec.params.len(),
            cmd.positional.len()
        )));
    }
    let mut values = BTreeMap::new();
    for (i, v) in cmd.positional.iter().enumerate() {
        values.insert(spec.params[i].0, v.clone());
    }
    for (key, v) in &cmd.keyword {
        let Some(param) = spec.params.iter().find(|p| p.0 == key) else {
            return Err(err(format!("unexpected keyword `{key}`")));
        };
        if values.insert(param.0, v.clone()).is_some() {
            return Err(err(format!("`{key}` given both positionally and by keyword")));
        }
    }
    for &(name, ty, default) in spec.params {
        let v = match (values.get(name), default) {
            (Some(v), _) => v,
            (None, Required) => return Err(err(format!("missing argument `{name}`"))),
            (None, Num(n)) => values.entry(name).or_insert(Value::Num(n)),
            (None, Fallback::Vec3(v)) => values
                .entry(name)
                .or_insert(Value::Array(v.map(Value::Num).to_vec())),
            (None, EmptyMap) => values.entry(name).or_insert(Value::Map(BTreeMap::new())),
        };
        if !ty.accepts(v) {
            return Err(err(format!("`{name}` must be a {}, got {v}", ty.name())));
        }
    }
    Ok(Args {
        command: &cmd.name,
        values,
    })
}

fn request(name: &str, a: &Args) -> Result<TaskRequest, CommandError> {
    Ok(match name {
        "pickup_brick" => TaskRequest::PickupBrick {
            color: a.text("color"),
            offset: a.num("offset"),
        },
        "drop_brick" => TaskRequest::DropBrick {
            orientation: a.vec3("orientation"),
            offset: a.num("offset"),
        },
        "move_hand" => TaskRequest::MoveHand {
            orientation: a.vec3("orientation"),
            translation: a.vec3("translation"),
        },
        "move_by_object" => TaskRequest::MoveByObject {
            color: a.text("color"),
            translation: a.vec3("translation"),
        },
        "do_skill_from_library" => TaskRequest::DoSkill {
            name: a.text("name"),
            substitution: a.map("substitution"),
        },
        "move_to" => TaskRequest::MoveTo {
            translation: a.vec3("translation"),
            orientation: a.vec3("orientation"),
        },
        "gripper" => match a.text("state").as_str() {
            "on" => TaskRequest::Gripper { on: true },
            "off" => TaskRequest::Gripper { on: false },
            other => return Err(a.error(format!("state must be 'on' or 'off', got '{other}'"))),
        },
        "locate" => TaskRequest::Locate { object: a.text("object") },
        _ => unreachable!("not an action command"),
    })
}

fn save_last_n_tasks(session: &mut Session, name: &str, n: usize) -> Result<Response, CommandError> {
    let available = session.kg().tasked_count();
    if n == 0 || n > available {
        return Err(CommandError::History { requested: n, available });
    }
    let mut sections = Vec::with_capacity(n);
    for record in session.kg().last_n_tasked(n) {
        let skill = record.skill.clone().unwrap_or_default();
        let steps = TaskRequest::from_event(&skill, &record.params)
            .and_then(|r| r.compile(session.kg()))
            .map_err(|e| CommandError::Skill(format!("task {} cannot be recorded: {e}", record.event_id)))?;
        sections.push(SkillSection {
            source: skill,
            signature: record.signature.clone().unwrap_or_default(),
            steps,
        });
    }
    let graph = session
        .kg_mut()
        .save_skill(name, &sections)
        .map_err(|e| CommandError::Skill(e.to_string()))?;
    let steps: usize = sections.iter().map(|s| s.steps.len()).sum();
    Ok(Response::Result(json!({
        "skill": name,
        "root": graph.root,
        "tasks": n,
        "steps": steps,
    })))
}

/// Runs a parsed command. Action commands are queued as Tasked events;
/// everything else answers immediately.
pub fn dispatch(cmd: &Command, session: &mut Session) -> Result<Response, CommandError> {
    let spec = spec(&cmd.name)?;
    let args = bind(cmd, spec)?;
    if spec.action {
        let req = request(spec.name, &args)?;
        req.compile_builtin().map_err(|e| args.error(e.to_string()))?;
        let id = session
            .submit(&cmd.raw, &req)
            .map_err(|e| CommandError::Internal(e.to_string()))?;
        return Ok(Response::EventId(id));
    }
    match spec.name {
        "save_last_n_tasks" => save_last_n_tasks(session, &args.text("name"), args.num("n") as usize),
        "show_last_n_tasks" => {
            let tasks: Vec<_> = session
                .kg()
                .last_n_tasked(args.num("n") as usize)
                .iter()
                .map(|r| session.summarize(r))
                .collect();
            Ok(Response::Result(json!(tasks)))
        }
        "list_skills" => {
            let kg = session.kg();
            let skills: Vec<_> = kg
                .skill_names()
                .map(|name| {
                    let kind = match kg.skill_kind(name) {
                        Some(SkillKind::Base) => "base",
                        Some(SkillKind::Derived) => "derived",
                        _ => "custom",
                    };
                    json!({ "name": name, "kind": kind })
                })
                .collect();
            Ok(Response::Result(json!(skills)))
        }
        "stop" => {
            let active = session.active().map(|e| e.event_id);
            session.request_stop();
            Ok(Response::Result(json!({ "stop_requested": true, "active": active })))
        }
        "reset_world" => {
            session
                .reset_world()
                .map_err(|e| CommandError::Internal(e.to_string()))?;
            Ok(Response::Result(json!({ "reset": true })))
        }
        other => unreachable!("unhandled command {other}"),
    }
}

/// Parses and dispatches one line of input.
pub fn execute(text: &str, session: &mut Session) -> Result<Response, CommandError> {
    dispatch(&parse(text)?, session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::OutcomeStatus;
    use crate::kg::parse_timestamp;
    use crate::sim::Scene;

    fn session() -> Session {
        Session::new(
            Scene::default(),
            None,
            parse_timestamp("2024-Jul-12-12-00-00.000").unwrap(),
        )
        .unwrap()
    }

    fn event_id(r: Result<Response, CommandError>) -> ElementId {
        match r {
            Ok(Response::EventId(id)) => id,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn action_signature_is_verbatim() {
        let mut s = session();
        let text = "pickup_brick( 'red',offset=3 )";
        let id = event_id(execute(text, &mut s));
        assert_eq!(s.kg().event(id).unwrap().signature.as_deref(), Some(text));
    }

    #[test]
    fn unknown_command_suggests() {
        let mut s = session();
        match execute("pickup_brik('red')", &mut s) {
            Err(CommandError::UnknownCommand { suggestions, .. }) => assert_eq!(suggestions[0], "pickup_brick"),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.kg().tasked_count(), 0);
    }

    #[test]
    fn bad_arguments_insert_nothing() {
        let mut s = session();
        for text in [
            "pickup_brick()",
            "pickup_brick(3)",
            "pickup_brick('red', offset=0)",
            "pickup_brick('red', colour='blue')",
            "pickup_brick('red', color='blue')",
            "move_hand(orientation=[0,0])",
            "show_last_n_tasks(-1)",
            "show_last_n_tasks(1.5)",
            "gripper('maybe')",
            "stop(1)",
        ] {
            assert!(
                matches!(execute(text, &mut s), Err(CommandError::Argument { .. })),
                "{text}"
            );
        }
        assert_eq!(s.kg().tasked_count(), 0);
    }

    #[test]
    fn queries_do_not_touch_the_log() {
        let mut s = session();
        event_id(execute("move_hand(translation=[0,0,1])", &mut s));
        let before = s.kg().tasked_ids().to_vec();
        let Ok(Response::Result(v)) = execute("show_last_n_tasks(10)", &mut s) else {
            panic!()
        };
        assert_eq!(v.as_array().unwrap().len(), 1);
        execute("list_skills()", &mut s).unwrap();
        assert_eq!(s.kg().tasked_ids(), before);
    }

    #[test]
    fn save_needs_enough_history() {
        let mut s = session();
        event_id(execute("move_hand(translation=[0,0,1])", &mut s));
        assert!(matches!(
            execute("save_last_n_tasks('X', 2)", &mut s),
            Err(CommandError::History { requested: 2, available: 1 })
        ));
        assert!(matches!(
            execute("save_last_n_tasks('X', 0)", &mut s),
            Err(CommandError::History { .. })
        ));
    }

    #[test]
    fn save_and_replay_with_substitution() {
        let mut s = session();
        event_id(execute("pickup_brick('red', offset=3)", &mut s));
        event_id(execute("move_hand(orientation=[0,0,0], translation=[0,0,5])", &mut s));
        event_id(execute("drop_brick(orientation=[0,0,0], offset=3)", &mut s));
        assert!(s.run_until_idle(5000).unwrap());
        let Ok(Response::Result(v)) = execute("save_last_n_tasks('Lift', 3)", &mut s) else {
            panic!()
        };
        assert_eq!(v["tasks"], 3);
        assert_eq!(v["steps"], 5 + 1 + 3);
        assert!(matches!(
            execute("save_last_n_tasks('Lift', 3)", &mut s),
            Err(CommandError::Skill(_))
        ));
        let id = event_id(execute("do_skill_from_library('Lift', {'red': 'blue'})", &mut s));
        assert!(s.run_until_idle(5000).unwrap());
        assert_eq!(s.outcome_of(id).unwrap().status, OutcomeStatus::Succeeded);
        let blue = s.world().brick("blue").unwrap();
        assert!(blue.bottom_z() > 0.02);
    }

    #[test]
    fn dangling_substitution_fails_the_task() {
        let mut s = session();
        event_id(execute("pickup_brick('red')", &mut s));
        s.run_until_idle(5000).unwrap();
        execute("save_last_n_tasks('P', 1)", &mut s).unwrap();
        let id = event_id(execute("do_skill_from_library('P', {'blue': 'green'})", &mut s));
        s.run_until_idle(100).unwrap();
        assert_eq!(s.outcome_of(id).unwrap().status, OutcomeStatus::Failed);
    }

    #[test]
    fn error_body_carries_offset() {
        let mut s = session();
        let r: Response = execute("pickup_brick(", &mut s).into();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["error"]["kind"], "parse");
        assert_eq!(v["error"]["offset"], 13);
    }

    #[test]
    fn response_wire_shape() {
        assert_eq!(serde_json::to_value(Response::EventId(7)).unwrap(), json!({"event_id": 7}));
        assert_eq!(
            serde_json::to_value(Response::Result(json!([1]))).unwrap(),
            json!({"result": [1]})
        );
    }
}
