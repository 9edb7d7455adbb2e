//! Transactional story-building session.
//!
//! A session walks IDLE -> STORY_CREATED -> IN_SCENE -> IN_ROUND and back.
//! Chains are buffered and only reach the graph on `end_chain`. Every
//! operation validates completely before it mutates, so a failed call leaves
//! the session untouched.
//!
//! Besides the edges agents add, the session inserts structural `before`
//! edges whenever events are committed:
//!
//! * an actor's events are totally ordered in commit order;
//! * a chain's events are linearly ordered;
//! * the first events of an actor in a round follow every actor's last event
//!   of the previous non-empty round (likewise for scenes, where a `Move`
//!   counts as the actor's last event);
//! * a chain claiming an exclusive POI follows the chain that last released it.
//!
//! All of these point into the newly committed events, so they cannot close a
//! cycle; only agent-supplied temporal edges need a reachability check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, ToolError};
use crate::gest::{
    ActorDecl, EventNode, Fingerprint, GestEdge, GestGraph, GestNode, LogicalRelation, Location,
    NodeKind, ObjectDecl, Relation, SceneMeta, TemporalRelation,
};
use crate::registry::{CapabilityRegistry, Gender, Posture, MOVE_ACTION};
use crate::rules::{
    apply_chain_action, apply_interaction, check_interaction, ActorState, ChainProgress, LastUnit,
    ObjectInstance,
};

type ToolResult<T> = Result<T, ToolError>;

fn fail<T>(code: ErrorCode, message: impl Into<String>) -> ToolResult<T> {
    Err(ToolError::new(code, message))
}

fn fail_hint<T>(code: ErrorCode, message: impl Into<String>, hint: impl Into<String>) -> ToolResult<T> {
    Err(ToolError::new(code, message).with_hint(hint))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Idle,
    StoryCreated,
    InScene,
    InRound,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Idle => "IDLE",
            Phase::StoryCreated => "STORY_CREATED",
            Phase::InScene => "IN_SCENE",
            Phase::InRound => "IN_ROUND",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferedEvent {
    pub action: String,
    pub entities: Vec<String>,
    pub recorded: bool,
    pub acquired: Option<ObjectInstance>,
}

/// A chain under construction. `sim` is the actor as they would be after the
/// buffered events; the real actor state is untouched until commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenChain {
    pub chain_id: String,
    pub actor_id: String,
    pub progress: ChainProgress,
    pub sim: ActorState,
    pub buffered: Vec<BufferedEvent>,
    /// Whether `start_chain` took the POI's occupancy (as opposed to the actor
    /// already being seated there).
    pub claimed_poi: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSnapshot {
    pub region: String,
    pub posture: Posture,
    pub held: Vec<ObjectInstance>,
    pub seated_poi: Option<String>,
}

impl From<&ActorState> for ActorSnapshot {
    fn from(a: &ActorState) -> Self {
        ActorSnapshot {
            region: a.region_id.clone(),
            posture: a.posture,
            held: a.held.clone(),
            seated_poi: a.seated_poi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStep {
    pub valid_next: Vec<String>,
    pub may_end: bool,
    /// Object ids the buffered event refers to.
    pub entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub scene_id: String,
    pub round_index: u32,
    pub committed: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    #[serde(skip)]
    registry: Arc<CapabilityRegistry>,
    phase: Phase,
    stories: u32,
    graph: GestGraph,
    actors: BTreeMap<String, ActorState>,
    open_chains: BTreeMap<String, OpenChain>,
    /// Exclusive POI id -> actor currently using it.
    poi_occupancy: BTreeMap<String, String>,
    /// Index into `graph.scenes`.
    current_scene: Option<usize>,
    round_index: u32,
    recording: bool,
    committed_this_round: BTreeMap<String, Vec<String>>,
    committed_this_scene: BTreeMap<String, Vec<String>>,
    last_event: BTreeMap<String, String>,
    prev_round_last: BTreeMap<String, String>,
    prev_scene_last: BTreeMap<String, String>,
    /// Exclusive POI id -> (actor, last event of the chain that released it).
    poi_release: BTreeMap<String, (String, String)>,
    chains_started: u32,
    events_committed: u32,
}

impl Session {
    pub fn new(registry: Arc<CapabilityRegistry>) -> Self {
        Session {
            registry,
            phase: Phase::Idle,
            stories: 0,
            graph: GestGraph::new(),
            actors: BTreeMap::new(),
            open_chains: BTreeMap::new(),
            poi_occupancy: BTreeMap::new(),
            current_scene: None,
            round_index: 0,
            recording: false,
            committed_this_round: BTreeMap::new(),
            committed_this_scene: BTreeMap::new(),
            last_event: BTreeMap::new(),
            prev_round_last: BTreeMap::new(),
            prev_scene_last: BTreeMap::new(),
            poi_release: BTreeMap::new(),
            chains_started: 0,
            events_committed: 0,
        }
    }

    pub fn registry(&self) -> &CapabilityRegistry {
        &self.registry
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn graph(&self) -> &GestGraph {
        &self.graph
    }

    pub fn actors(&self) -> &BTreeMap<String, ActorState> {
        &self.actors
    }

    pub fn actor(&self, id: &str) -> Option<&ActorState> {
        self.actors.get(id)
    }

    pub fn open_chain(&self, actor_id: &str) -> Option<&OpenChain> {
        self.open_chains.get(actor_id)
    }

    pub fn occupancy(&self) -> &BTreeMap<String, String> {
        &self.poi_occupancy
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn current_scene(&self) -> Option<&SceneMeta> {
        self.current_scene.map(|i| &self.graph.scenes[i])
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    /// FNV-1a over the canonical JSON form of the whole session state (maps
    /// are ordered, the registry is excluded).
    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of_bytes(&serde_json::to_vec(self).expect("session state serializes"))
    }

    fn require_phase(&self, tool: &str, allowed: &[Phase]) -> ToolResult<()> {
        if allowed.contains(&self.phase) {
            return Ok(());
        }
        let names: Vec<&str> = allowed.iter().map(|p| p.as_str()).collect();
        fail_hint(
            ErrorCode::State,
            format!("{tool} is not allowed in phase {}", self.phase),
            format!("{tool} needs phase {}", names.join(" or ")),
        )
    }

    fn require_actor(&self, id: &str) -> ToolResult<&ActorState> {
        self.actors.get(id).ok_or_else(|| {
            ToolError::new(ErrorCode::NotFound, format!("unknown actor '{id}'")).with_hint(format!(
                "existing actors: {}",
                self.actors.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    fn require_scene_actor(&self, id: &str) -> ToolResult<&ActorState> {
        let actor = self.require_actor(id)?;
        let scene = self.current_scene().expect("scene phases have a scene");
        if !scene.actor_ids.iter().any(|a| a == id) {
            return fail_hint(
                ErrorCode::NotFound,
                format!("actor '{id}' is not part of scene {}", scene.scene_id),
                format!("scene actors: {}", scene.actor_ids.join(", ")),
            );
        }
        Ok(actor)
    }

    fn require_event(&self, id: &str) -> ToolResult<()> {
        if self.graph.event(id).is_some() {
            Ok(())
        } else {
            fail(ErrorCode::NotFound, format!("no committed event '{id}'"))
        }
    }

    // ---------------------------------------------------------------- story

    pub fn create_story(&mut self, title: &str, seed_text: Option<&str>) -> ToolResult<String> {
        self.require_phase("create_story", &[Phase::Idle])?;
        let stories = self.stories + 1;
        *self = Session::new(Arc::clone(&self.registry));
        self.stories = stories;
        self.graph.meta.title = Some(title.to_string());
        self.graph.meta.seed_text = seed_text.map(str::to_string);
        self.phase = Phase::StoryCreated;
        Ok(format!("story{stories}"))
    }

    pub fn create_actor(
        &mut self,
        name: &str,
        gender: Gender,
        skin_id: &str,
        start_region: &str,
    ) -> ToolResult<String> {
        self.require_phase("create_actor", &[Phase::StoryCreated])?;
        let reg = &self.registry;
        let Some(skin) = reg.skin(skin_id) else {
            return fail_hint(
                ErrorCode::NotFound,
                format!("unknown skin '{skin_id}'"),
                "list skins with get_skins(gender)",
            );
        };
        if skin.gender != gender {
            let matching: Vec<&str> = reg
                .skins()
                .iter()
                .filter(|s| s.gender == gender)
                .map(|s| s.id.as_str())
                .collect();
            return fail_hint(
                ErrorCode::GenderMismatch,
                format!("skin '{skin_id}' is {}, actor is {}", skin.gender.as_str(), gender.as_str()),
                format!("{} skins: {}", gender.as_str(), matching.join(", ")),
            );
        }
        if reg.region(start_region).is_none() {
            return fail_hint(
                ErrorCode::NotFound,
                format!("unknown region '{start_region}'"),
                "list regions with get_regions(episode_id)",
            );
        }
        if name.trim().is_empty() {
            return fail(ErrorCode::BadArgs, "actor name must not be empty");
        }
        if self.actors.values().any(|a| a.name == name) {
            return fail(ErrorCode::Duplicate, format!("an actor named '{name}' already exists"));
        }
        let id = format!("a{}", self.actors.len() + 1);
        self.graph.nodes.push(GestNode {
            id: id.clone(),
            kind: NodeKind::ExistsActor(ActorDecl {
                name: name.to_string(),
                gender,
                skin_id: skin_id.to_string(),
                start_region: start_region.to_string(),
            }),
        });
        self.actors.insert(
            id.clone(),
            ActorState::new(id.clone(), name, gender, skin_id, start_region),
        );
        Ok(id)
    }

    pub fn start_scene(
        &mut self,
        episode_id: &str,
        region_id: &str,
        actor_ids: &[String],
        narrative: &str,
    ) -> ToolResult<String> {
        self.require_phase("start_scene", &[Phase::StoryCreated])?;
        let reg = &self.registry;
        let Some(ep) = reg.episode(episode_id) else {
            return fail_hint(
                ErrorCode::NotFound,
                format!("unknown episode '{episode_id}'"),
                "list episodes with get_episodes",
            );
        };
        if !ep.region_ids.iter().any(|r| r == region_id) {
            return fail_hint(
                ErrorCode::NotFound,
                format!("region '{region_id}' is not part of episode '{episode_id}'"),
                format!("regions of {episode_id}: {}", ep.region_ids.join(", ")),
            );
        }
        if actor_ids.is_empty() {
            return fail(ErrorCode::BadArgs, "a scene needs at least one actor");
        }
        let mut seen = BTreeSet::new();
        let mut placed = Vec::new();
        for id in actor_ids {
            if !seen.insert(id.as_str()) {
                return fail(ErrorCode::Duplicate, format!("actor '{id}' is listed twice"));
            }
            let actor = self.require_actor(id)?;
            if actor.region_id != region_id {
                if self.last_event.contains_key(id) {
                    return fail_hint(
                        ErrorCode::WrongRegion,
                        format!("{id} is in '{}', not in '{region_id}'", actor.region_id),
                        format!("call move_actors([\"{id}\"], \"{region_id}\") first"),
                    );
                }
                placed.push(id.clone());
            }
        }

        // Actors without any event yet are simply placed in the scene region.
        for id in &placed {
            self.actors.get_mut(id).expect("checked").region_id = region_id.to_string();
            if let Some(NodeKind::ExistsActor(decl)) = self
                .graph
                .nodes
                .iter_mut()
                .find(|n| &n.id == id)
                .map(|n| &mut n.kind)
            {
                decl.start_region = region_id.to_string();
            }
        }
        let scene_id = format!("s{}", self.graph.scenes.len() + 1);
        self.graph.scenes.push(SceneMeta {
            scene_id: scene_id.clone(),
            episode_id: episode_id.to_string(),
            region_id: region_id.to_string(),
            actor_ids: actor_ids.to_vec(),
            narrative: narrative.to_string(),
        });
        self.current_scene = Some(self.graph.scenes.len() - 1);
        self.round_index = 0;
        self.committed_this_round.clear();
        self.committed_this_scene.clear();
        self.prev_round_last.clear();
        self.phase = Phase::InScene;
        Ok(scene_id)
    }

    pub fn start_round(&mut self) -> ToolResult<BTreeMap<String, ActorSnapshot>> {
        self.require_phase("start_round", &[Phase::InScene])?;
        self.round_index += 1;
        self.committed_this_round.clear();
        self.phase = Phase::InRound;
        Ok(self.scene_snapshot())
    }

    fn scene_snapshot(&self) -> BTreeMap<String, ActorSnapshot> {
        let scene = self.current_scene().expect("in a scene");
        scene
            .actor_ids
            .iter()
            .map(|id| (id.clone(), ActorSnapshot::from(&self.actors[id])))
            .collect()
    }

    // --------------------------------------------------------------- chains

    pub fn start_chain(&mut self, actor_id: &str, poi_id: &str) -> ToolResult<Vec<String>> {
        self.require_phase("start_chain", &[Phase::InRound])?;
        let actor = self.require_scene_actor(actor_id)?;
        if self.open_chains.contains_key(actor_id) {
            return fail_hint(
                ErrorCode::ChainOpen,
                format!("{actor_id} already has an open chain"),
                "finish it with end_chain or discard it with abort_chain",
            );
        }
        let reg = &self.registry;
        let region_id = &self.current_scene().expect("in scene").region_id;
        let region_pois = || reg.region(region_id).map(|r| r.poi_ids.join(", ")).unwrap_or_default();
        let Some(poi) = reg.poi(poi_id) else {
            return fail_hint(
                ErrorCode::NotFound,
                format!("unknown POI '{poi_id}'"),
                format!("POIs in {region_id}: {}", region_pois()),
            );
        };
        if &poi.region_id != region_id {
            return fail_hint(
                ErrorCode::NotFound,
                format!("POI '{poi_id}' is not in scene region '{region_id}'"),
                format!("POIs in {region_id}: {}", region_pois()),
            );
        }
        if actor.posture != Posture::Standing && actor.seated_poi.as_deref() != Some(poi_id) {
            return fail_hint(
                ErrorCode::Posture,
                format!(
                    "{actor_id} is {} at '{}'",
                    actor.posture.as_str(),
                    actor.seated_poi.as_deref().unwrap_or("?")
                ),
                format!(
                    "resume at '{}' and stand up first",
                    actor.seated_poi.as_deref().unwrap_or("?")
                ),
            );
        }
        let mut claimed = false;
        if poi.exclusive {
            match self.poi_occupancy.get(poi_id) {
                Some(holder) if holder != actor_id => {
                    let free: Vec<&str> = reg
                        .region(region_id)
                        .map(|r| {
                            r.poi_ids
                                .iter()
                                .filter(|p| !self.poi_occupancy.contains_key(*p))
                                .map(String::as_str)
                                .collect()
                        })
                        .unwrap_or_default();
                    return fail_hint(
                        ErrorCode::Capacity,
                        format!("'{poi_id}' is in use by {holder}"),
                        format!("free POIs in {region_id}: {}", free.join(", ")),
                    );
                }
                Some(_) => {}
                None => claimed = true,
            }
        }

        let chain_id = format!("c{}", self.chains_started + 1);
        let progress = ChainProgress::start(&chain_id, poi, actor);
        let valid = progress.valid_next(poi);
        let chain = OpenChain {
            chain_id,
            actor_id: actor_id.to_string(),
            progress,
            sim: actor.clone(),
            buffered: Vec::new(),
            claimed_poi: claimed,
        };
        if claimed {
            self.poi_occupancy.insert(poi_id.to_string(), actor_id.to_string());
        }
        self.open_chains.insert(actor_id.to_string(), chain);
        self.chains_started += 1;
        Ok(valid)
    }

    fn require_chain(&self, actor_id: &str) -> ToolResult<&OpenChain> {
        self.open_chains.get(actor_id).ok_or_else(|| {
            ToolError::new(ErrorCode::NoChain, format!("{actor_id} has no open chain"))
                .with_hint("start one with start_chain(actor_id, poi_id)")
        })
    }

    /// Valid next actions of an open chain, narrowed to the pending
    /// spawnable action while the actor is locked.
    fn chain_options(&self, chain: &OpenChain) -> Vec<String> {
        let poi = self.registry.poi(&chain.progress.poi_id).expect("chain POI exists");
        let valid = chain.progress.valid_next(poi);
        match &chain.progress.lock {
            Some(lock) => {
                let seq = &self.registry.spawnable(&lock.spawnable).expect("known").sequence;
                valid.into_iter().filter(|a| *a == seq[lock.next]).collect()
            }
            None => valid,
        }
    }

    pub fn continue_chain(&mut self, actor_id: &str, action: &str) -> ToolResult<ChainStep> {
        self.require_phase("continue_chain", &[Phase::InRound])?;
        let chain = self.require_chain(actor_id)?;
        let reg = Arc::clone(&self.registry);
        let poi = reg.poi(&chain.progress.poi_id).expect("chain POI exists");
        let mut progress = chain.progress.clone();
        let mut sim = chain.sim.clone();
        let effect = match apply_chain_action(&reg, poi, &mut progress, &mut sim, action) {
            Ok(effect) => effect,
            Err(v) => {
                let options = self.chain_options(chain);
                return fail_hint(
                    v.code(),
                    v.to_string(),
                    format!("valid next actions at {}: {}", poi.id, options.join(", ")),
                );
            }
        };
        let recorded = self.recording;
        let chain = self.open_chains.get_mut(actor_id).expect("checked");
        chain.progress = progress;
        chain.sim = sim;
        let entities = effect.entities();
        chain.buffered.push(BufferedEvent {
            action: action.to_string(),
            entities: entities.clone(),
            recorded,
            acquired: effect.acquired,
        });
        let chain = &self.open_chains[actor_id];
        Ok(ChainStep {
            valid_next: self.chain_options(chain),
            may_end: chain.progress.may_end(poi),
            entities,
        })
    }

    pub fn end_chain(&mut self, actor_id: &str) -> ToolResult<Vec<String>> {
        self.require_phase("end_chain", &[Phase::InRound])?;
        let chain = self.require_chain(actor_id)?;
        let reg = Arc::clone(&self.registry);
        let poi = reg.poi(&chain.progress.poi_id).expect("chain POI exists");
        if chain.buffered.is_empty() {
            return fail_hint(
                ErrorCode::EmptyChain,
                format!("{}'s chain has no actions", actor_id),
                format!("add one of: {}", self.chain_options(chain).join(", ")),
            );
        }
        if let Some(lock) = &chain.progress.lock {
            let seq = &reg.spawnable(&lock.spawnable).expect("known").sequence;
            return fail_hint(
                ErrorCode::Locked,
                format!("{actor_id} is in the middle of the {} sequence", lock.spawnable),
                format!("continue with '{}'", seq[lock.next]),
            );
        }
        if !chain.progress.may_end(poi) {
            return fail_hint(
                ErrorCode::NotTerminal,
                format!(
                    "the chain cannot end on '{}'",
                    chain.progress.cursor.as_deref().unwrap_or("")
                ),
                format!("continue with one of: {}", self.chain_options(chain).join(", ")),
            );
        }

        let chain = self.open_chains.remove(actor_id).expect("checked");
        let scene_id = self.current_scene().expect("in scene").scene_id.clone();
        for ev in &chain.buffered {
            if let Some(obj) = &ev.acquired {
                self.graph.nodes.push(GestNode {
                    id: obj.instance_id.clone(),
                    kind: NodeKind::ExistsObject(ObjectDecl {
                        object_type: obj.object_type.clone(),
                        chain_id: chain.chain_id.clone(),
                    }),
                });
            }
        }
        let mut ids = Vec::with_capacity(chain.buffered.len());
        for ev in &chain.buffered {
            let id = self.push_event(EventNode {
                action: ev.action.clone(),
                performer: actor_id.to_string(),
                entities: ev.entities.clone(),
                location: Location {
                    region: poi.region_id.clone(),
                    poi: Some(poi.id.clone()),
                },
                properties: BTreeMap::new(),
                scene_id: Some(scene_id.clone()),
                round_index: self.round_index,
                recorded: ev.recorded,
                chain_id: Some(chain.chain_id.clone()),
            });
            ids.push(id);
        }
        let first = ids[0].clone();
        let last = ids[ids.len() - 1].clone();

        // structural ordering
        let mut incoming = self.structural_predecessors(actor_id);
        if poi.exclusive {
            if let Some((holder, ev)) = self.poi_release.get(&poi.id) {
                if holder != actor_id {
                    incoming.push(ev.clone());
                }
            }
        }
        for src in incoming {
            self.add_edge_dedup(GestEdge::before(src, first.clone()));
        }
        for w in ids.windows(2) {
            self.add_edge_dedup(GestEdge::before(w[0].clone(), w[1].clone()));
        }

        let mut state = chain.sim;
        state.last_unit = LastUnit::Chain;
        state.locked = false;
        if poi.exclusive {
            if state.seated_poi.as_deref() == Some(poi.id.as_str()) {
                self.poi_occupancy.insert(poi.id.clone(), actor_id.to_string());
            } else {
                self.poi_occupancy.remove(&poi.id);
                self.poi_release
                    .insert(poi.id.clone(), (actor_id.to_string(), last.clone()));
            }
        }
        self.actors.insert(actor_id.to_string(), state);
        self.note_commits(actor_id, &ids);
        Ok(ids)
    }

    pub fn abort_chain(&mut self, actor_id: &str) -> ToolResult<()> {
        self.require_phase("abort_chain", &[Phase::InRound])?;
        self.require_chain(actor_id)?;
        let chain = self.open_chains.remove(actor_id).expect("checked");
        if chain.claimed_poi {
            self.poi_occupancy.remove(&chain.progress.poi_id);
        }
        if chain.chain_id == format!("c{}", self.chains_started) {
            self.chains_started -= 1;
        }
        Ok(())
    }

    // ---------------------------------------------------------- interactions

    pub fn do_interaction(
        &mut self,
        actor_a: &str,
        actor_b: &str,
        interaction: &str,
        transfer: Option<&str>,
    ) -> ToolResult<(String, String)> {
        self.require_phase("do_interaction", &[Phase::InRound])?;
        let giver = self.require_scene_actor(actor_a)?;
        let receiver = self.require_scene_actor(actor_b)?;
        let reg = Arc::clone(&self.registry);
        let Some(itype) = reg.interaction(interaction) else {
            let names: Vec<&str> = reg.interactions().iter().map(|i| i.name.as_str()).collect();
            return fail_hint(
                ErrorCode::NotFound,
                format!("unknown interaction '{interaction}'"),
                format!("interactions: {}", names.join(", ")),
            );
        };
        if actor_a == actor_b {
            return fail(ErrorCode::Interaction, "an actor cannot interact with themselves");
        }
        for id in [actor_a, actor_b] {
            if self.open_chains.contains_key(id) {
                return fail_hint(
                    ErrorCode::Interaction,
                    format!("{id} has an open chain"),
                    format!("end or abort {id}'s chain first"),
                );
            }
        }
        if let Err(v) = check_interaction(&reg, giver, receiver, itype, transfer) {
            let hint = match &v {
                crate::rules::InteractionViolation::Consecutive(..) => {
                    "let one of them perform a chain first".to_string()
                }
                crate::rules::InteractionViolation::MissingTransfer(_) => format!(
                    "{actor_a} holds: {}",
                    giver.held.iter().map(|h| h.instance_id.as_str()).collect::<Vec<_>>().join(", ")
                ),
                _ => String::new(),
            };
            return fail_hint(v.code(), v.to_string(), hint);
        }

        let mut giver = giver.clone();
        let mut receiver = receiver.clone();
        apply_interaction(&mut giver, &mut receiver, transfer);
        let scene = self.current_scene().expect("in scene");
        let scene_id = scene.scene_id.clone();
        let region = scene.region_id.clone();
        let make = |performer: &str, other: &str, action: String| EventNode {
            action,
            performer: performer.to_string(),
            entities: std::iter::once(other.to_string())
                .chain(transfer.map(str::to_string))
                .collect(),
            location: Location {
                region: region.clone(),
                poi: None,
            },
            properties: BTreeMap::new(),
            scene_id: Some(scene_id.clone()),
            round_index: self.round_index,
            recorded: self.recording,
            chain_id: None,
        };
        let ev_a = make(actor_a, actor_b, itype.name.clone());
        let ev_b = make(actor_b, actor_a, itype.receiver_action());
        let id_a = self.push_event(ev_a);
        let id_b = self.push_event(ev_b);
        for (actor, id) in [(actor_a, &id_a), (actor_b, &id_b)] {
            for src in self.structural_predecessors(actor) {
                self.add_edge_dedup(GestEdge::before(src, id.clone()));
            }
        }
        self.add_edge_dedup(GestEdge::temporal(id_a.clone(), id_b.clone(), TemporalRelation::SameTime));
        self.actors.insert(actor_a.to_string(), giver);
        self.actors.insert(actor_b.to_string(), receiver);
        self.note_commits(actor_a, std::slice::from_ref(&id_a));
        self.note_commits(actor_b, std::slice::from_ref(&id_b));
        Ok((id_a, id_b))
    }

    // ----------------------------------------------------- temporal edges

    pub fn add_temporal_dependency(&mut self, event_a: &str, event_b: &str, relation: &str) -> ToolResult<()> {
        self.require_phase(
            "add_temporal_dependency",
            &[Phase::StoryCreated, Phase::InScene, Phase::InRound],
        )?;
        let (from, to) = match relation {
            "before" => (event_a, event_b),
            "after" => (event_b, event_a),
            other => {
                return fail_hint(
                    ErrorCode::BadRelation,
                    format!("unknown temporal relation '{other}'"),
                    "use 'before' or 'after', or add_starts_with",
                )
            }
        };
        self.require_event(event_a)?;
        self.require_event(event_b)?;
        if event_a == event_b {
            return fail(ErrorCode::SelfRelation, format!("'{event_a}' cannot precede itself"));
        }
        if let Some(path) = self.temporal_path(to, from, false) {
            return fail_hint(
                ErrorCode::Cycle,
                format!(
                    "before({from}, {to}) would close the cycle {} -> {to}",
                    path.join(" -> ")
                ),
                format!("{to} already happens no later than {from}"),
            );
        }
        self.add_edge_dedup(GestEdge::before(from, to));
        Ok(())
    }

    pub fn add_starts_with(&mut self, event_a: &str, event_b: &str) -> ToolResult<()> {
        self.require_phase(
            "add_starts_with",
            &[Phase::StoryCreated, Phase::InScene, Phase::InRound],
        )?;
        self.require_event(event_a)?;
        self.require_event(event_b)?;
        if event_a == event_b {
            return fail(ErrorCode::SelfRelation, format!("'{event_a}' cannot start with itself"));
        }
        for (x, y) in [(event_a, event_b), (event_b, event_a)] {
            if let Some(path) = self.temporal_path(x, y, true) {
                return fail_hint(
                    ErrorCode::Cycle,
                    format!("{x} must end before {y} starts: {}", path.join(" -> ")),
                    "equal starts are impossible for events that are strictly ordered",
                );
            }
        }
        self.add_edge_dedup(GestEdge::temporal(event_a, event_b, TemporalRelation::StartsWith));
        Ok(())
    }

    /// Path from `src` to `dst` over before arcs and both directions of
    /// same_time/starts_with. With `strict`, the path must contain at least
    /// one before arc.
    fn temporal_path(&self, src: &str, dst: &str, strict: bool) -> Option<Vec<String>> {
        let mut adj: BTreeMap<&str, Vec<(&str, bool)>> = BTreeMap::new();
        for (e, rel) in self.graph.temporal_edges() {
            match rel {
                TemporalRelation::Before => adj.entry(&e.from).or_default().push((&e.to, true)),
                TemporalRelation::SameTime | TemporalRelation::StartsWith => {
                    adj.entry(&e.from).or_default().push((&e.to, false));
                    adj.entry(&e.to).or_default().push((&e.from, false));
                }
                TemporalRelation::Concurrent => {}
            }
        }
        // states: (node, has_strict)
        let mut prev: BTreeMap<(&str, bool), Option<(&str, bool)>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        prev.insert((src, false), None);
        queue.push_back((src, false));
        while let Some(state) = queue.pop_front() {
            let (node, strict_so_far) = state;
            if node == dst && (strict_so_far || !strict) {
                let mut path = vec![node.to_string()];
                let mut cur = state;
                while let Some(Some(p)) = prev.get(&cur) {
                    path.push(p.0.to_string());
                    cur = *p;
                }
                path.reverse();
                return Some(path);
            }
            for &(next, is_before) in adj.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                let ns = (next, strict_so_far || is_before);
                if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(ns) {
                    e.insert(Some(state));
                    queue.push_back(ns);
                }
            }
        }
        None
    }

    // ------------------------------------------------------------ recording

    pub fn start_recording(&mut self) -> ToolResult<()> {
        self.require_phase("start_recording", &[Phase::InScene, Phase::InRound])?;
        if self.recording {
            return fail_hint(ErrorCode::State, "recording is already on", "call stop_recording first");
        }
        self.recording = true;
        Ok(())
    }

    pub fn stop_recording(&mut self) -> ToolResult<()> {
        self.require_phase("stop_recording", &[Phase::InScene, Phase::InRound])?;
        if !self.recording {
            return fail_hint(ErrorCode::State, "recording is not on", "call start_recording first");
        }
        self.recording = false;
        Ok(())
    }

    // --------------------------------------------------------- round/scene

    pub fn end_round(&mut self) -> ToolResult<RoundSummary> {
        self.require_phase("end_round", &[Phase::InRound])?;
        if !self.open_chains.is_empty() {
            let open: Vec<&str> = self.open_chains.keys().map(String::as_str).collect();
            return fail_hint(
                ErrorCode::ChainOpen,
                format!("open chains remain for {}", open.join(", ")),
                "end_chain or abort_chain each of them",
            );
        }
        if !self.committed_this_round.is_empty() {
            self.prev_round_last = self
                .committed_this_round
                .iter()
                .map(|(a, evs)| (a.clone(), evs.last().expect("non-empty").clone()))
                .collect();
        }
        self.phase = Phase::InScene;
        Ok(RoundSummary {
            scene_id: self.current_scene().expect("in scene").scene_id.clone(),
            round_index: self.round_index,
            committed: std::mem::take(&mut self.committed_this_round),
        })
    }

    pub fn end_scene(&mut self) -> ToolResult<String> {
        self.require_phase("end_scene", &[Phase::InScene])?;
        let scene = self.current_scene().expect("in scene").clone();
        let mut summary = String::new();
        let _ = writeln!(
            summary,
            "Scene {} ({} / {}), {} round(s).",
            scene.scene_id, scene.episode_id, scene.region_id, self.round_index
        );
        for id in &scene.actor_ids {
            let a = &self.actors[id];
            let events = self.committed_this_scene.get(id).cloned().unwrap_or_default();
            let actions: Vec<String> = events
                .iter()
                .map(|e| format!("{}:{}", e, self.graph.event(e).expect("committed").action))
                .collect();
            let held: Vec<&str> = a.held.iter().map(|h| h.instance_id.as_str()).collect();
            let _ = writeln!(
                summary,
                "- {} ({}): {} event(s) [{}]; now {} in {}{}{}",
                a.name,
                id,
                events.len(),
                actions.join(", "),
                a.posture.as_str(),
                a.region_id,
                a.seated_poi.as_ref().map(|p| format!(" at {p}")).unwrap_or_default(),
                if held.is_empty() {
                    String::new()
                } else {
                    format!(", holding {}", held.join(", "))
                },
            );
        }
        if !self.committed_this_scene.is_empty() {
            self.prev_scene_last = self
                .committed_this_scene
                .keys()
                .map(|a| (a.clone(), self.last_event[a].clone()))
                .collect();
        }
        self.committed_this_scene.clear();
        self.committed_this_round.clear();
        self.prev_round_last.clear();
        self.current_scene = None;
        self.round_index = 0;
        self.phase = Phase::StoryCreated;
        Ok(summary)
    }

    pub fn move_actors(&mut self, actor_ids: &[String], region_id: &str) -> ToolResult<Vec<String>> {
        self.require_phase("move_actors", &[Phase::StoryCreated])?;
        if self.registry.region(region_id).is_none() {
            return fail(ErrorCode::NotFound, format!("unknown region '{region_id}'"));
        }
        if actor_ids.is_empty() {
            return fail(ErrorCode::BadArgs, "no actors to move");
        }
        let mut seen = BTreeSet::new();
        for id in actor_ids {
            if !seen.insert(id.as_str()) {
                return fail(ErrorCode::Duplicate, format!("actor '{id}' is listed twice"));
            }
            let a = self.require_actor(id)?;
            if a.posture != Posture::Standing {
                return fail_hint(
                    ErrorCode::Posture,
                    format!("{id} is {}", a.posture.as_str()),
                    format!(
                        "stand {id} up at '{}' in a scene first",
                        a.seated_poi.as_deref().unwrap_or("?")
                    ),
                );
            }
            if a.region_id == region_id {
                return fail(ErrorCode::WrongRegion, format!("{id} is already in '{region_id}'"));
            }
        }
        let mut ids = Vec::new();
        for actor_id in actor_ids {
            let id = self.push_event(EventNode {
                action: MOVE_ACTION.to_string(),
                performer: actor_id.clone(),
                entities: Vec::new(),
                location: Location {
                    region: region_id.to_string(),
                    poi: None,
                },
                properties: BTreeMap::new(),
                scene_id: None,
                round_index: 0,
                recorded: false,
                chain_id: None,
            });
            if let Some(src) = self.last_event.get(actor_id).cloned() {
                self.add_edge_dedup(GestEdge::before(src, id.clone()));
            }
            self.last_event.insert(actor_id.clone(), id.clone());
            self.prev_scene_last.insert(actor_id.clone(), id.clone());
            self.actors.get_mut(actor_id).expect("checked").region_id = region_id.to_string();
            ids.push(id);
        }
        Ok(ids)
    }

    // ------------------------------------------------- non-temporal edges

    pub fn add_logical_relation(&mut self, event_a: &str, event_b: &str, relation: &str) -> ToolResult<()> {
        self.require_phase("add_logical_relation", &[Phase::StoryCreated, Phase::InScene])?;
        self.require_event(event_a)?;
        self.require_event(event_b)?;
        let Some(rel) = LogicalRelation::parse(relation) else {
            let names: Vec<&str> = LogicalRelation::ALL.iter().map(|r| r.as_str()).collect();
            return fail_hint(
                ErrorCode::BadRelation,
                format!("unknown logical relation '{relation}'"),
                format!("logical relations: {}", names.join(", ")),
            );
        };
        if event_a == event_b {
            return fail(ErrorCode::SelfRelation, "an event cannot relate to itself");
        }
        self.add_edge_dedup(GestEdge {
            from: event_a.to_string(),
            to: event_b.to_string(),
            relation: Relation::Logical(rel),
        });
        Ok(())
    }

    pub fn add_semantic_relation(&mut self, event_a: &str, event_b: &str, relation: &str) -> ToolResult<()> {
        self.require_phase("add_semantic_relation", &[Phase::StoryCreated, Phase::InScene])?;
        self.require_event(event_a)?;
        self.require_event(event_b)?;
        if relation.trim().is_empty() {
            return fail(ErrorCode::BadRelation, "semantic relation text must not be empty");
        }
        if event_a == event_b {
            return fail(ErrorCode::SelfRelation, "an event cannot relate to itself");
        }
        self.add_edge_dedup(GestEdge {
            from: event_a.to_string(),
            to: event_b.to_string(),
            relation: Relation::Semantic(relation.to_string()),
        });
        Ok(())
    }

    pub fn finalize_gest(&mut self) -> ToolResult<GestGraph> {
        self.require_phase("finalize_gest", &[Phase::StoryCreated])?;
        if !self.graph.events().any(|(_, e)| e.scene_id.is_some()) {
            return fail_hint(
                ErrorCode::EmptyStory,
                "the story has no scene events",
                "build at least one scene with a committed chain",
            );
        }
        // Scene barriers were inserted as events were committed.
        self.phase = Phase::Idle;
        Ok(self.graph.clone())
    }

    // ------------------------------------------------------------ internals

    fn push_event(&mut self, ev: EventNode) -> String {
        self.events_committed += 1;
        let id = format!("e{}", self.events_committed);
        self.graph.nodes.push(GestNode {
            id: id.clone(),
            kind: NodeKind::Event(ev),
        });
        id
    }

    /// Events a new unit of `actor_id` must follow: their own last event plus
    /// round and scene barriers when this is their first unit there.
    fn structural_predecessors(&self, actor_id: &str) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(last) = self.last_event.get(actor_id) {
            out.push(last.clone());
        }
        if !self.committed_this_round.contains_key(actor_id) {
            out.extend(self.prev_round_last.values().cloned());
        }
        if !self.committed_this_scene.contains_key(actor_id) {
            out.extend(self.prev_scene_last.values().cloned());
        }
        out
    }

    fn note_commits(&mut self, actor_id: &str, ids: &[String]) {
        self.committed_this_round
            .entry(actor_id.to_string())
            .or_default()
            .extend(ids.iter().cloned());
        self.committed_this_scene
            .entry(actor_id.to_string())
            .or_default()
            .extend(ids.iter().cloned());
        self.last_event
            .insert(actor_id.to_string(), ids.last().expect("non-empty").clone());
    }

    fn add_edge_dedup(&mut self, edge: GestEdge) {
        if edge.from != edge.to && !self.graph.edges.contains(&edge) {
            self.graph.edges.push(edge);
        }
    }
}
