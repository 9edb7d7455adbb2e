#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use gest_core::procedural::StoryRng;
use gest_core::server::{self, AppState};
use gest_core::session::{Phase, Session};
use gest_core::tools::{self, ToolCall};
use gest_core::CapabilityRegistry;
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A server on an ephemeral port, running on its own runtime thread.
pub struct TestServer {
    pub base: String,
    pub state: Arc<AppState>,
    pub agent: ureq::Agent,
}

impl TestServer {
    pub fn start(state: Arc<AppState>) -> Self {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let addr = listener.local_addr().unwrap();
        let st = Arc::clone(&state);
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                server::spawn_expiry(&st);
                let l = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(l, server::router(st)).await.unwrap();
            });
        });
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        TestServer {
            base: format!("http://{addr}"),
            state,
            agent,
        }
    }

    pub fn sample() -> Self {
        Self::start(AppState::new(
            Arc::new(CapabilityRegistry::sample()),
            server::DEFAULT_IDLE_TIMEOUT,
        ))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut r = self.agent.post(format!("{}{path}", self.base)).send_json(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn delete(&self, path: &str) -> u16 {
        self.agent
            .delete(format!("{}{path}", self.base))
            .call()
            .unwrap()
            .status()
            .as_u16()
    }

    pub fn new_session(&self) -> String {
        let (status, body) = self.post("/sessions", &json!({}));
        assert_eq!(status, 201);
        body["session_id"].as_str().unwrap().to_string()
    }

    pub fn call(&self, sid: &str, tool: &str, args: &Value) -> Value {
        let (status, body) = self.post(&format!("/sessions/{sid}/call"), &json!({"tool": tool, "args": args}));
        assert_eq!(status, 200, "{body}");
        body
    }

    pub fn fingerprint(&self, sid: &str) -> Value {
        let (status, body) = self.get(&format!("/sessions/{sid}/fingerprint"));
        assert_eq!(status, 200);
        body
    }
}

const NAMES: [&str; 6] = ["Marcus", "Elena", "Sam", "Rita", "Omar", "Lena"];

/// Produces a random tool-call script by driving a live session: most calls
/// follow what the session reports as possible, a share are deliberately
/// wrong (bad ids, wrong phase, invalid actions, malformed args).
pub struct ScriptGen {
    rng: StoryRng,
    reg: Arc<CapabilityRegistry>,
    pub session: Session,
    valid_next: std::collections::BTreeMap<String, Vec<String>>,
}

impl ScriptGen {
    pub fn new(seed: u64, reg: Arc<CapabilityRegistry>) -> Self {
        ScriptGen {
            rng: StoryRng::new(seed),
            session: Session::new(Arc::clone(&reg)),
            reg,
            valid_next: Default::default(),
        }
    }

    fn actor_id(&mut self) -> String {
        let n = self.session.actors().len();
        if n > 0 && self.rng.chance(0.92) {
            return format!("a{}", 1 + self.rng.below(n));
        }
        format!("a{}", n + 1)
    }

    fn scene_actor(&mut self) -> String {
        let members: Vec<String> = self.session.current_scene().map(|s| s.actor_ids.clone()).unwrap_or_default();
        if !members.is_empty() && self.rng.chance(0.9) {
            return self.rng.pick(&members).clone();
        }
        self.actor_id()
    }

    fn event_id(&mut self) -> String {
        let ids: Vec<String> = self.session.graph().events().map(|(id, _)| id.to_string()).collect();
        if !ids.is_empty() && self.rng.chance(0.92) {
            return self.rng.pick(&ids).clone();
        }
        format!("e{}", ids.len() + 7)
    }

    fn region(&mut self) -> String {
        let regions = self.reg.regions();
        self.rng.pick(regions).id.clone()
    }

    fn scene_region(&mut self) -> String {
        match self.session.current_scene() {
            Some(s) if !self.rng.chance(0.15) => s.region_id.clone(),
            _ => self.region(),
        }
    }

    fn poi_in(&mut self, region: &str) -> String {
        let pois: Vec<String> = self
            .reg
            .pois()
            .iter()
            .filter(|p| p.region_id == region)
            .map(|p| p.id.clone())
            .collect();
        if pois.is_empty() || self.rng.chance(0.05) {
            return "nowhere".into();
        }
        self.rng.pick(&pois).clone()
    }

    fn any_action(&mut self) -> String {
        let acts = self.reg.actions();
        self.rng.pick(acts).name.clone()
    }

    fn create_actor(&mut self) -> ToolCall {
        let male = self.rng.chance(0.5);
        let skins: Vec<String> = self
            .reg
            .skins()
            .iter()
            .filter(|s| self.rng.chance(0.9) == (s.gender.as_str() == if male { "male" } else { "female" }))
            .map(|s| s.id.clone())
            .collect();
        let skin = if skins.is_empty() { "nobody".to_string() } else { self.rng.pick(&skins).clone() };
        let name = if self.rng.chance(0.9) {
            format!("{} {}", self.rng.pick(&NAMES), self.session.actors().len() + 1)
        } else {
            self.rng.pick(&NAMES).to_string()
        };
        let region = self.region();
        call(
            "create_actor",
            json!({"name": name, "gender": if male {"male"} else {"female"}, "skin_id": skin, "start_region": region}),
        )
    }

    fn start_scene(&mut self) -> ToolCall {
        let region = match self.session.actors().values().next() {
            Some(a) if self.rng.chance(0.8) => a.region_id.clone(),
            _ => self.region(),
        };
        let ep = self
            .reg
            .episodes()
            .iter()
            .find(|e| e.region_ids.contains(&region) && !self.rng.chance(0.05))
            .map_or("ep_house".to_string(), |e| e.id.clone());
        let mut ids: Vec<String> = self
            .session
            .actors()
            .values()
            .filter(|a| a.region_id == region || self.rng.chance(0.1))
            .map(|a| a.actor_id.clone())
            .collect();
        if ids.is_empty() {
            ids.push(self.actor_id());
        }
        call(
            "start_scene",
            json!({"episode_id": ep, "region_id": region, "actor_ids": ids, "narrative": "scene"}),
        )
    }

    fn chain_step(&mut self) -> ToolCall {
        let open: Vec<String> = self.valid_next.keys().cloned().collect();
        if !open.is_empty() && self.rng.chance(0.85) {
            let actor = self.rng.pick(&open).clone();
            let next = self.valid_next[&actor].clone();
            let roll = self.rng.below(10);
            let session_open = self.session.open_chain(&actor);
            let may_end = session_open.is_some_and(|c| !c.buffered.is_empty());
            if roll < 5 && !next.is_empty() {
                let action = self.rng.pick(&next).clone();
                return call("continue_chain", json!({"actor_id": actor, "action": action}));
            }
            if roll < 8 && may_end {
                return call("end_chain", json!({"actor_id": actor}));
            }
            if roll < 9 {
                return call("abort_chain", json!({"actor_id": actor}));
            }
            let action = self.any_action();
            return call("continue_chain", json!({"actor_id": actor, "action": action}));
        }
        let actor = self.scene_actor();
        let region = self.scene_region();
        let poi = self.poi_in(&region);
        call("start_chain", json!({"actor_id": actor, "poi_id": poi}))
    }

    fn interaction(&mut self) -> ToolCall {
        let a = self.scene_actor();
        let b = self.scene_actor();
        let kinds = self.reg.interactions();
        let kind = self.rng.pick(kinds).clone();
        let mut args = json!({"actor_a": a, "actor_b": b, "interaction": kind.name});
        if kind.requires_transfer || self.rng.chance(0.05) {
            let held: Vec<String> = self
                .session
                .actor(&a)
                .map(|s| s.held.iter().map(|o| o.instance_id.clone()).collect())
                .unwrap_or_default();
            let inst = if held.is_empty() || self.rng.chance(0.1) {
                "c1#1".to_string()
            } else {
                self.rng.pick(&held).clone()
            };
            args["transfer_instance"] = json!(inst);
        }
        call("do_interaction", args)
    }

    fn relation(&mut self) -> ToolCall {
        let a = self.event_id();
        let b = self.event_id();
        match self.rng.below(10) {
            0..=5 => {
                let rel = *self.rng.pick(&["before", "after", "before", "after", "during"]);
                call("add_temporal_dependency", json!({"event_a": a, "event_b": b, "relation": rel}))
            }
            6 | 7 => call("add_starts_with", json!({"event_a": a, "event_b": b})),
            8 => {
                let rel = *self.rng.pick(&["causes", "enables", "prevents", "requires", "implies"]);
                call("add_logical_relation", json!({"event_a": a, "event_b": b, "relation": rel}))
            }
            _ => call("add_semantic_relation", json!({"event_a": a, "event_b": b, "relation": "observes"})),
        }
    }

    fn junk(&mut self) -> ToolCall {
        match self.rng.below(5) {
            0 => call("teleport", json!({})),
            1 => call("start_chain", json!({"actor_id": 7})),
            2 => call("end_chain", json!({"actor_id": "a1", "extra": true})),
            3 => {
                let region = self.region();
                call("get_pois", json!({"region_id": region, "page": self.rng.below(3)}))
            }
            _ => {
                let region = self.region();
                let poi = self.poi_in(&region);
                call("get_poi_first_actions", json!({"poi_id": poi}))
            }
        }
    }

    fn choose(&mut self) -> ToolCall {
        if self.rng.chance(0.04) {
            return self.junk();
        }
        let roll = self.rng.below(100);
        match self.session.phase() {
            Phase::Idle => {
                if roll < 90 {
                    call("create_story", json!({"title": "t"}))
                } else {
                    self.relation()
                }
            }
            Phase::StoryCreated => {
                let n = self.session.actors().len();
                if roll < 45 && n < 4 || n == 0 && roll < 90 {
                    self.create_actor()
                } else if roll < 75 {
                    self.start_scene()
                } else if roll < 85 {
                    let actors: Vec<String> = self.session.actors().keys().cloned().collect();
                    let ids = if actors.is_empty() { vec!["a1".to_string()] } else { vec![self.rng.pick(&actors).clone()] };
                    let region = self.region();
                    call("move_actors", json!({"actor_ids": ids, "region_id": region}))
                } else if roll < 92 {
                    self.relation()
                } else if roll < 97 {
                    call("finalize_gest", json!({}))
                } else {
                    call("start_round", json!({}))
                }
            }
            Phase::InScene => {
                if roll < 55 {
                    call("start_round", json!({}))
                } else if roll < 65 {
                    call(if self.rng.chance(0.5) { "start_recording" } else { "stop_recording" }, json!({}))
                } else if roll < 85 {
                    call("end_scene", json!({}))
                } else if roll < 95 {
                    self.relation()
                } else {
                    self.chain_step()
                }
            }
            Phase::InRound => {
                if roll < 60 {
                    self.chain_step()
                } else if roll < 72 {
                    self.interaction()
                } else if roll < 82 {
                    self.relation()
                } else if roll < 92 {
                    call("end_round", json!({}))
                } else if roll < 95 {
                    call(if self.rng.chance(0.5) { "start_recording" } else { "stop_recording" }, json!({}))
                } else {
                    call("end_scene", json!({}))
                }
            }
        }
    }

    /// Chooses, applies and returns the next call along with its result.
    pub fn step(&mut self) -> (ToolCall, tools::ToolResult) {
        let c = self.choose();
        let r = tools::call(&mut self.session, &c.tool, &c.args);
        self.observe(&c, &r);
        (c, r)
    }

    fn observe(&mut self, c: &ToolCall, r: &tools::ToolResult) {
        let actor = c.args.get("actor_id").and_then(Value::as_str).map(str::to_string);
        match (c.tool.as_str(), r.ok) {
            ("start_chain" | "continue_chain", true) => {
                let next = r.result.as_ref().unwrap()["valid_next"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_str().unwrap().to_string())
                    .collect();
                self.valid_next.insert(actor.unwrap(), next);
            }
            ("end_chain" | "abort_chain", true) => {
                self.valid_next.remove(&actor.unwrap());
            }
            ("create_story" | "finalize_gest", true) => self.valid_next.clear(),
            _ => {}
        }
    }

    pub fn script(mut self, len: usize) -> Vec<ToolCall> {
        (0..len).map(|_| self.step().0).collect()
    }
}

pub fn call(tool: &str, args: Value) -> ToolCall {
    ToolCall {
        tool: tool.to_string(),
        args,
    }
}
