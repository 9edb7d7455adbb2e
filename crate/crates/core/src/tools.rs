//! JSON tool layer over [`Session`]: the published manifest, argument
//! checking against each tool's parameter list, and dispatch.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{ErrorCode, ToolError};
use crate::registry::{CapabilityRegistry, Gender, QueryError};
use crate::session::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    String,
    Integer,
    StringList,
    Enum(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Exploration,
    Building,
}

#[derive(Debug, Clone, Copy)]
pub struct ToolSpec {
    pub name: &'static str,
    pub kind: ToolKind,
    pub description: &'static str,
    pub params: &'static [Param],
}

const fn req(name: &'static str, ty: ParamType, description: &'static str) -> Param {
    Param {
        name,
        ty,
        required: true,
        description,
    }
}

const fn opt(name: &'static str, ty: ParamType, description: &'static str) -> Param {
    Param {
        name,
        ty,
        required: false,
        description,
    }
}

use ParamType::{Integer, String as Str, StringList};

const GENDER: ParamType = ParamType::Enum(&["male", "female"]);
const PAGE: Param = opt("page", Integer, "zero-based page index (default 0)");
const PAGE_SIZE: Param = opt("page_size", Integer, "items per page, 1..=100 (default 20)");
const ACTOR: Param = req("actor_id", Str, "actor id returned by create_actor");
const EVENT_A: Param = req("event_a", Str, "committed event id");
const EVENT_B: Param = req("event_b", Str, "committed event id");

pub const TOOLS: &[ToolSpec] = &[
    ToolSpec {
        name: "get_episodes",
        kind: ToolKind::Exploration,
        description: "List episodes (engine environments) with their region ids.",
        params: &[PAGE, PAGE_SIZE],
    },
    ToolSpec {
        name: "get_regions",
        kind: ToolKind::Exploration,
        description: "List the regions of an episode with their POI ids.",
        params: &[req("episode_id", Str, "episode id"), PAGE, PAGE_SIZE],
    },
    ToolSpec {
        name: "get_pois",
        kind: ToolKind::Exploration,
        description: "List the points of interest in a region, including whether each is exclusive.",
        params: &[req("region_id", Str, "region id"), PAGE, PAGE_SIZE],
    },
    ToolSpec {
        name: "get_poi_first_actions",
        kind: ToolKind::Exploration,
        description: "Actions a chain at this POI may start with.",
        params: &[req("poi_id", Str, "POI id")],
    },
    ToolSpec {
        name: "get_next_actions",
        kind: ToolKind::Exploration,
        description: "Actions that may follow `action` at this POI, and whether a chain may end on it.",
        params: &[req("poi_id", Str, "POI id"), req("action", Str, "action name")],
    },
    ToolSpec {
        name: "get_skins",
        kind: ToolKind::Exploration,
        description: "List character skins of one gender.",
        params: &[req("gender", GENDER, "male or female"), PAGE, PAGE_SIZE],
    },
    ToolSpec {
        name: "get_spawnable_types",
        kind: ToolKind::Exploration,
        description: "Pocket items and their atomic take-out, use, stash sequences.",
        params: &[],
    },
    ToolSpec {
        name: "get_interaction_types",
        kind: ToolKind::Exploration,
        description: "Two-actor interactions and whether they hand over an object.",
        params: &[],
    },
    ToolSpec {
        name: "get_simulation_rules",
        kind: ToolKind::Exploration,
        description: "Plain-text description of the simulation constraints and every error code.",
        params: &[],
    },
    ToolSpec {
        name: "create_story",
        kind: ToolKind::Building,
        description: "Start a new story. Phase IDLE -> STORY_CREATED.",
        params: &[
            req("title", Str, "story title"),
            opt("seed_text", Str, "optional story prompt"),
        ],
    },
    ToolSpec {
        name: "create_actor",
        kind: ToolKind::Building,
        description: "Declare an actor. Only in STORY_CREATED.",
        params: &[
            req("name", Str, "unique display name"),
            req("gender", GENDER, "male or female"),
            req("skin_id", Str, "skin of the same gender"),
            req("start_region", Str, "region the actor starts in"),
        ],
    },
    ToolSpec {
        name: "start_scene",
        kind: ToolKind::Building,
        description: "Open a scene in one region of an episode. Actors must be in that region unless they have no events yet.",
        params: &[
            req("episode_id", Str, "episode id"),
            req("region_id", Str, "region of that episode"),
            req("actor_ids", StringList, "participating actors"),
            opt("narrative", Str, "what the scene is about"),
        ],
    },
    ToolSpec {
        name: "start_round",
        kind: ToolKind::Building,
        description: "Begin a round and get every scene actor's posture, held objects and location.",
        params: &[],
    },
    ToolSpec {
        name: "start_chain",
        kind: ToolKind::Building,
        description: "Open an action chain for an actor at a POI; returns the valid first actions.",
        params: &[ACTOR, req("poi_id", Str, "POI in the scene region")],
    },
    ToolSpec {
        name: "continue_chain",
        kind: ToolKind::Building,
        description: "Buffer the next action of the actor's open chain; returns the valid next actions and whether the chain may end.",
        params: &[ACTOR, req("action", Str, "one of the valid next actions")],
    },
    ToolSpec {
        name: "end_chain",
        kind: ToolKind::Building,
        description: "Commit the buffered chain to the graph; returns the new event ids.",
        params: &[ACTOR],
    },
    ToolSpec {
        name: "abort_chain",
        kind: ToolKind::Building,
        description: "Discard the open chain and everything it buffered.",
        params: &[ACTOR],
    },
    ToolSpec {
        name: "do_interaction",
        kind: ToolKind::Building,
        description: "Commit a synchronized two-actor interaction. Give needs transfer_instance.",
        params: &[
            req("actor_a", Str, "initiating actor (the giver for Give)"),
            req("actor_b", Str, "other actor"),
            req("interaction", Str, "interaction type name"),
            opt("transfer_instance", Str, "object instance handed over"),
        ],
    },
    ToolSpec {
        name: "add_temporal_dependency",
        kind: ToolKind::Building,
        description: "Order two committed events. Rejected if it would create a cycle.",
        params: &[EVENT_A, EVENT_B, req("relation", Str, "before or after")],
    },
    ToolSpec {
        name: "add_starts_with",
        kind: ToolKind::Building,
        description: "Make two committed events start together.",
        params: &[EVENT_A, EVENT_B],
    },
    ToolSpec {
        name: "start_recording",
        kind: ToolKind::Building,
        description: "Mark events buffered from now on as recorded.",
        params: &[],
    },
    ToolSpec {
        name: "stop_recording",
        kind: ToolKind::Building,
        description: "Stop marking buffered events as recorded.",
        params: &[],
    },
    ToolSpec {
        name: "end_round",
        kind: ToolKind::Building,
        description: "Close the round; later rounds are ordered after it.",
        params: &[],
    },
    ToolSpec {
        name: "end_scene",
        kind: ToolKind::Building,
        description: "Close the scene and get a summary of what every actor did.",
        params: &[],
    },
    ToolSpec {
        name: "move_actors",
        kind: ToolKind::Building,
        description: "Walk standing actors to another region between scenes.",
        params: &[
            req("actor_ids", StringList, "actors to move"),
            req("region_id", Str, "destination region"),
        ],
    },
    ToolSpec {
        name: "add_logical_relation",
        kind: ToolKind::Building,
        description: "Add a logical edge: causes, enables, prevents or requires.",
        params: &[EVENT_A, EVENT_B, req("relation", Str, "causes, enables, prevents or requires")],
    },
    ToolSpec {
        name: "add_semantic_relation",
        kind: ToolKind::Building,
        description: "Add a free-text semantic edge such as observes or sets_context_for.",
        params: &[EVENT_A, EVENT_B, req("relation", Str, "non-empty relation text")],
    },
    ToolSpec {
        name: "finalize_gest",
        kind: ToolKind::Building,
        description: "Finish the story and return the graph. Phase STORY_CREATED -> IDLE.",
        params: &[],
    },
];

pub fn tool(name: &str) -> Option<&'static ToolSpec> {
    TOOLS.iter().find(|t| t.name == name)
}

impl ParamType {
    fn schema(self) -> Value {
        match self {
            ParamType::String => json!({"type": "string"}),
            ParamType::Integer => json!({"type": "integer", "minimum": 0}),
            ParamType::StringList => json!({"type": "array", "items": {"type": "string"}}),
            ParamType::Enum(values) => json!({"type": "string", "enum": values}),
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            ParamType::String => v.is_string(),
            ParamType::Integer => v.is_u64(),
            ParamType::StringList => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
            ParamType::Enum(values) => v.as_str().is_some_and(|s| values.contains(&s)),
        }
    }
}

impl ToolSpec {
    /// JSON Schema of the argument object.
    pub fn schema(&self) -> Value {
        let mut props = Map::new();
        for p in self.params {
            let mut s = p.ty.schema();
            s["description"] = Value::from(p.description);
            props.insert(p.name.to_string(), s);
        }
        let required: Vec<&str> = self.params.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({
            "type": "object",
            "properties": props,
            "required": required,
            "additionalProperties": false,
        })
    }

    pub fn check_args(&self, args: &Value) -> Result<(), ToolError> {
        let bad = |m: String| {
            Err(ToolError::new(ErrorCode::BadArgs, m).with_hint(format!(
                "{} takes: {}",
                self.name,
                self.params
                    .iter()
                    .map(|p| if p.required { p.name.to_string() } else { format!("{}?", p.name) })
                    .collect::<Vec<_>>()
                    .join(", ")
            )))
        };
        let obj = match args {
            Value::Object(o) => o,
            Value::Null => return self.check_args(&Value::Object(Map::new())),
            _ => return bad("arguments must be a JSON object".into()),
        };
        for key in obj.keys() {
            if !self.params.iter().any(|p| p.name == key) {
                return bad(format!("unexpected argument '{key}'"));
            }
        }
        for p in self.params {
            match obj.get(p.name) {
                None | Some(Value::Null) if p.required => {
                    return bad(format!("missing argument '{}'", p.name));
                }
                None | Some(Value::Null) => {}
                Some(v) if !p.ty.accepts(v) => {
                    return bad(format!("argument '{}' must match {}", p.name, p.ty.schema()));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// The manifest served at `GET /tools`.
pub fn manifest() -> Value {
    Value::Array(
        TOOLS
            .iter()
            .map(|t| {
                json!({
                    "name": t.name,
                    "kind": t.kind,
                    "description": t.description,
                    "parameters": t.schema(),
                })
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: Value,
}

/// Either `{"ok": true, "result": ...}` or `{"ok": false, "error": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ToolError>,
}

impl ToolResult {
    pub fn success(v: Value) -> Self {
        ToolResult {
            ok: true,
            result: Some(v),
            error: None,
        }
    }

    pub fn failure(e: ToolError) -> Self {
        ToolResult {
            ok: false,
            result: None,
            error: Some(e),
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }
}

impl From<Result<Value, ToolError>> for ToolResult {
    fn from(r: Result<Value, ToolError>) -> Self {
        match r {
            Ok(v) => ToolResult::success(v),
            Err(e) => ToolResult::failure(e),
        }
    }
}

struct Args<'a>(&'a Map<String, Value>);

impl<'a> Args<'a> {
    fn str(&self, k: &str) -> &'a str {
        self.0.get(k).and_then(Value::as_str).expect("checked against schema")
    }

    fn opt_str(&self, k: &str) -> Option<&'a str> {
        self.0.get(k).and_then(Value::as_str)
    }

    fn list(&self, k: &str) -> Vec<String> {
        self.0
            .get(k)
            .and_then(Value::as_array)
            .expect("checked against schema")
            .iter()
            .map(|v| v.as_str().expect("checked").to_string())
            .collect()
    }

    fn usize_or(&self, k: &str, default: usize) -> usize {
        self.0
            .get(k)
            .and_then(Value::as_u64)
            .map_or(default, |v| usize::try_from(v).unwrap_or(usize::MAX))
    }

    fn gender(&self, k: &str) -> Gender {
        match self.str(k) {
            "male" => Gender::Male,
            _ => Gender::Female,
        }
    }
}

const DEFAULT_PAGE_SIZE: usize = 20;

fn query<T: Serialize>(r: Result<T, QueryError>) -> Result<Value, ToolError> {
    r.map(|v| serde_json::to_value(v).expect("serializable"))
        .map_err(|e| ToolError::new(e.code(), e.to_string()))
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Validates and runs one tool call against `session`.
pub fn call(session: &mut Session, tool_name: &str, args: &Value) -> ToolResult {
    let Some(spec) = tool(tool_name) else {
        return ToolResult::failure(
            ToolError::new(ErrorCode::UnknownTool, format!("unknown tool '{tool_name}'"))
                .with_hint("GET /tools lists the available tools"),
        );
    };
    if let Err(e) = spec.check_args(args) {
        return ToolResult::failure(e);
    }
    let empty = Map::new();
    let a = Args(args.as_object().unwrap_or(&empty));
    dispatch(session, spec.name, &a).into()
}

/// Runs an exploration tool, which only needs the registry.
pub fn explore(reg: &CapabilityRegistry, tool_name: &str, args: &Value) -> ToolResult {
    let spec = match tool(tool_name) {
        Some(spec) if spec.kind == ToolKind::Exploration => spec,
        _ => {
            return ToolResult::failure(
                ToolError::new(ErrorCode::UnknownTool, format!("'{tool_name}' is not an exploration tool"))
                    .with_hint(format!(
                        "exploration tools: {}",
                        TOOLS
                            .iter()
                            .filter(|t| t.kind == ToolKind::Exploration)
                            .map(|t| t.name)
                            .collect::<Vec<_>>()
                            .join(", ")
                    )),
            )
        }
    };
    if let Err(e) = spec.check_args(args) {
        return ToolResult::failure(e);
    }
    let empty = Map::new();
    explore_checked(reg, spec.name, &Args(args.as_object().unwrap_or(&empty))).into()
}

fn explore_checked(reg: &CapabilityRegistry, tool: &str, a: &Args<'_>) -> Result<Value, ToolError> {
    let page = || a.usize_or("page", 0);
    let page_size = || a.usize_or("page_size", DEFAULT_PAGE_SIZE);
    Ok(match tool {
        "get_episodes" => query(reg.get_episodes(page(), page_size()))?,
        "get_regions" => query(reg.get_regions(a.str("episode_id"), page(), page_size()))?,
        "get_pois" => query(reg.get_pois(a.str("region_id"), page(), page_size()))?,
        "get_poi_first_actions" => {
            json!({"actions": query(reg.get_poi_first_actions(a.str("poi_id")))?})
        }
        "get_next_actions" => query(reg.get_next_actions(a.str("poi_id"), a.str("action")))?,
        "get_skins" => query(reg.get_skins(a.gender("gender"), page(), page_size()))?,
        "get_spawnable_types" => json!({"spawnables": reg.get_spawnable_types()}),
        "get_interaction_types" => json!({"interactions": reg.get_interaction_types()}),
        "get_simulation_rules" => json!({"rules": reg.get_simulation_rules()}),
        other => unreachable!("'{other}' is not an exploration tool"),
    })
}

fn dispatch(s: &mut Session, tool: &str, a: &Args<'_>) -> Result<Value, ToolError> {
    if tool.starts_with("get_") {
        return explore_checked(s.registry(), tool, a);
    }
    Ok(match tool {
        "create_story" => json!({"story_id": s.create_story(a.str("title"), a.opt_str("seed_text"))?}),
        "create_actor" => json!({"actor_id": s.create_actor(
            a.str("name"),
            a.gender("gender"),
            a.str("skin_id"),
            a.str("start_region"),
        )?}),
        "start_scene" => json!({"scene_id": s.start_scene(
            a.str("episode_id"),
            a.str("region_id"),
            &a.list("actor_ids"),
            a.opt_str("narrative").unwrap_or(""),
        )?}),
        "start_round" => json!({"actors": s.start_round()?}),
        "start_chain" => json!({"valid_next": s.start_chain(a.str("actor_id"), a.str("poi_id"))?}),
        "continue_chain" => to_value(s.continue_chain(a.str("actor_id"), a.str("action"))?),
        "end_chain" => json!({"event_ids": s.end_chain(a.str("actor_id"))?}),
        "abort_chain" => {
            s.abort_chain(a.str("actor_id"))?;
            json!({})
        }
        "do_interaction" => {
            let (x, y) = s.do_interaction(
                a.str("actor_a"),
                a.str("actor_b"),
                a.str("interaction"),
                a.opt_str("transfer_instance"),
            )?;
            json!({"event_ids": [x, y]})
        }
        "add_temporal_dependency" => {
            s.add_temporal_dependency(a.str("event_a"), a.str("event_b"), a.str("relation"))?;
            json!({})
        }
        "add_starts_with" => {
            s.add_starts_with(a.str("event_a"), a.str("event_b"))?;
            json!({})
        }
        "start_recording" => {
            s.start_recording()?;
            json!({})
        }
        "stop_recording" => {
            s.stop_recording()?;
            json!({})
        }
        "end_round" => to_value(s.end_round()?),
        "end_scene" => json!({"summary": s.end_scene()?}),
        "move_actors" => json!({"event_ids": s.move_actors(&a.list("actor_ids"), a.str("region_id"))?}),
        "add_logical_relation" => {
            s.add_logical_relation(a.str("event_a"), a.str("event_b"), a.str("relation"))?;
            json!({})
        }
        "add_semantic_relation" => {
            s.add_semantic_relation(a.str("event_a"), a.str("event_b"), a.str("relation"))?;
            json!({})
        }
        "finalize_gest" => {
            let g = s.finalize_gest()?;
            json!({"fingerprint": g.fingerprint().to_string(), "graph": g})
        }
        other => unreachable!("tool '{other}' is in the manifest but not dispatched"),
    })
}
