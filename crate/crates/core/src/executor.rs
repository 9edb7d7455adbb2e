//! Symbolic execution of a scheduled graph: frame-by-frame world states,
//! pairwise spatial relations, a template description and key-frame sampling.
//!
//! The world is symbolic. Actors stand in a region, optionally at a POI, and
//! an event's effects (posture change, pick-up, put-down, hand-over, move)
//! take hold on the event's end frame.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gest::{EventNode, GestGraph};
use crate::registry::{CapabilityRegistry, Posture, MOVE_ACTION};
use crate::schedule::Schedule;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("{actor} has overlapping events '{first}' and '{second}'")]
    ScheduleMismatch {
        actor: String,
        first: String,
        second: String,
    },
    #[error("event '{0}' has no scheduled interval")]
    Unscheduled(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorPose {
    pub region: String,
    pub poi: Option<String>,
    pub posture: Posture,
    pub held: Vec<String>,
    pub active_event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectPlace {
    HeldBy(String),
    RestingIn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub frame: i64,
    pub actors: BTreeMap<String, ActorPose>,
    pub objects: BTreeMap<String, ObjectPlace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialRelation {
    SameRegion,
    AtSamePoi,
    Holding,
    SittingOn,
    LyingOn,
    InteractingWith,
    Performing,
}

impl SpatialRelation {
    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            SpatialRelation::SameRegion | SpatialRelation::AtSamePoi | SpatialRelation::InteractingWith
        )
    }
}

/// `(subject, relation, object)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple(pub String, pub SpatialRelation, pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRelations {
    pub frame: i64,
    pub relations: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub fps: u32,
    pub frames: Vec<FrameRelations>,
    pub frame_map: BTreeMap<String, [i64; 2]>,
    pub description: String,
    pub sampled_frames: Vec<i64>,
}

/// Events that count as recorded: the flagged ones, or every event when the
/// graph flags none.
pub fn recorded_events(g: &GestGraph) -> BTreeSet<&str> {
    let flagged: BTreeSet<&str> = g.events().filter(|(_, e)| e.recorded).map(|(id, _)| id).collect();
    if flagged.is_empty() {
        g.events().map(|(id, _)| id).collect()
    } else {
        flagged
    }
}

fn check_overlaps(g: &GestGraph, s: &Schedule) -> Result<(), ExecError> {
    let mut per_actor: BTreeMap<&str, Vec<(i64, i64, &str)>> = BTreeMap::new();
    for (id, ev) in g.events() {
        let iv = s.get(id).ok_or_else(|| ExecError::Unscheduled(id.to_string()))?;
        per_actor.entry(&ev.performer).or_default().push((iv.start, iv.end, id));
    }
    for (actor, mut evs) in per_actor {
        evs.sort();
        for w in evs.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(ExecError::ScheduleMismatch {
                    actor: actor.to_string(),
                    first: w[0].2.to_string(),
                    second: w[1].2.to_string(),
                });
            }
        }
    }
    Ok(())
}

fn object_entities<'g>(g: &'g GestGraph, ev: &'g EventNode) -> impl Iterator<Item = &'g str> {
    ev.entities
        .iter()
        .filter(|e| g.node(e).is_some_and(|n| n.object().is_some()))
        .map(String::as_str)
}

fn other_actor<'g>(g: &'g GestGraph, ev: &'g EventNode) -> Option<&'g str> {
    ev.entities
        .iter()
        .find(|e| *e != &ev.performer && g.node(e).is_some_and(|n| n.actor().is_some()))
        .map(String::as_str)
}

fn is_interaction(ev: &EventNode) -> bool {
    ev.chain_id.is_none() && ev.action != MOVE_ACTION
}

/// One world state per frame, `0..makespan * fps`.
pub fn simulate(g: &GestGraph, s: &Schedule, reg: &CapabilityRegistry) -> Result<Vec<WorldState>, ExecError> {
    check_overlaps(g, s)?;
    let node_pos: HashMap<&str, usize> = g.node_index();

    let mut state = WorldState {
        frame: 0,
        actors: g
            .actors()
            .map(|(id, a)| {
                (
                    id.to_string(),
                    ActorPose {
                        region: a.start_region.clone(),
                        poi: None,
                        posture: Posture::Standing,
                        held: Vec::new(),
                        active_event: None,
                    },
                )
            })
            .collect(),
        objects: BTreeMap::new(),
    };
    // Objects rest in the region they are picked up from until then.
    for (_, ev) in g.events() {
        if ev.chain_id.is_some() && reg.action(&ev.action).is_some_and(|a| a.acquires.is_some()) {
            for obj in object_entities(g, ev) {
                state
                    .objects
                    .entry(obj.to_string())
                    .or_insert_with(|| ObjectPlace::RestingIn(ev.location.region.clone()));
            }
        }
    }

    // (end frame, start frame, node position, id)
    let mut by_end: Vec<(i64, i64, usize, &str)> = g
        .events()
        .map(|(id, _)| {
            let f = s.get(id).expect("checked").frames;
            (f[1], f[0], node_pos[id], id)
        })
        .collect();
    by_end.sort();
    let mut by_start: Vec<(i64, i64, usize, &str)> =
        by_end.iter().map(|&(e, st, p, id)| (st, e, p, id)).collect();
    by_start.sort();

    // Last event of each chain; an actor standing after it leaves the POI.
    let mut chain_last: HashMap<&str, (i64, &str)> = HashMap::new();
    for &(end, _, _, id) in &by_end {
        if let Some(chain) = g.event(id).and_then(|e| e.chain_id.as_deref()) {
            chain_last.insert(chain, (end, id));
        }
    }
    let chain_ends: HashSet<&str> = chain_last.into_values().map(|(_, id)| id).collect();

    let total = s.total_frames();
    let mut out = Vec::with_capacity(usize::try_from(total).unwrap_or(0));
    let mut next_end = 0;
    let mut next_start = 0;
    let mut active: BTreeMap<String, String> = BTreeMap::new();
    for frame in 0..total {
        while next_end < by_end.len() && by_end[next_end].0 <= frame {
            let id = by_end[next_end].3;
            finish_event(g, reg, &mut state, id);
            if chain_ends.contains(id) {
                let pose = state.actors.get_mut(&g.event(id).expect("event").performer).expect("declared");
                if pose.posture == Posture::Standing {
                    pose.poi = None;
                }
            }
            if active.get(&g.event(id).expect("event").performer).map(String::as_str) == Some(id) {
                active.remove(&g.event(id).expect("event").performer);
            }
            next_end += 1;
        }
        while next_start < by_start.len() && by_start[next_start].0 <= frame {
            let (_, end, _, id) = by_start[next_start];
            if end > frame {
                let ev = g.event(id).expect("event");
                active.insert(ev.performer.clone(), id.to_string());
                let pose = state.actors.get_mut(&ev.performer).expect("declared performer");
                if ev.chain_id.is_some() {
                    pose.poi = ev.location.poi.clone();
                } else if is_interaction(ev) {
                    pose.poi = None;
                }
            }
            next_start += 1;
        }
        for (actor, pose) in state.actors.iter_mut() {
            pose.active_event = active.get(actor).cloned();
        }
        state.frame = frame;
        out.push(state.clone());
    }
    Ok(out)
}

fn finish_event(g: &GestGraph, reg: &CapabilityRegistry, state: &mut WorldState, id: &str) {
    let ev = g.event(id).expect("event");
    let spec = reg.action(&ev.action);
    let performer = ev.performer.clone();
    if ev.action == MOVE_ACTION {
        let pose = state.actors.get_mut(&performer).expect("declared");
        pose.region = ev.location.region.clone();
        pose.poi = None;
        return;
    }
    if is_interaction(ev) {
        if reg.interaction(&ev.action).is_some_and(|t| t.requires_transfer) {
            if let Some(receiver) = other_actor(g, ev) {
                for obj in object_entities(g, ev) {
                    state.actors.get_mut(&performer).expect("declared").held.retain(|h| h != obj);
                    state
                        .actors
                        .get_mut(receiver)
                        .expect("declared")
                        .held
                        .push(obj.to_string());
                    state.objects.insert(obj.to_string(), ObjectPlace::HeldBy(receiver.to_string()));
                }
            }
        }
        return;
    }
    let Some(spec) = spec else { return };
    if spec.acquires.is_some() {
        for obj in object_entities(g, ev) {
            state.actors.get_mut(&performer).expect("declared").held.push(obj.to_string());
            state.objects.insert(obj.to_string(), ObjectPlace::HeldBy(performer.clone()));
        }
    }
    if spec.releases {
        for obj in object_entities(g, ev) {
            state.actors.get_mut(&performer).expect("declared").held.retain(|h| h != obj);
            state
                .objects
                .insert(obj.to_string(), ObjectPlace::RestingIn(ev.location.region.clone()));
        }
    }
    if let Some(post) = spec.posture_post {
        state.actors.get_mut(&performer).expect("declared").posture = post;
    }
}

/// Relations holding in one world state, sorted.
pub fn relations(g: &GestGraph, w: &WorldState) -> Vec<Triple> {
    let mut out = BTreeSet::new();
    let actors: Vec<(&String, &ActorPose)> = w.actors.iter().collect();
    for (i, (a, pa)) in actors.iter().enumerate() {
        for (b, pb) in &actors[i + 1..] {
            if pa.region == pb.region {
                out.insert(Triple(a.to_string(), SpatialRelation::SameRegion, b.to_string()));
                if pa.poi.is_some() && pa.poi == pb.poi {
                    out.insert(Triple(a.to_string(), SpatialRelation::AtSamePoi, b.to_string()));
                }
            }
        }
        for obj in &pa.held {
            out.insert(Triple(a.to_string(), SpatialRelation::Holding, obj.clone()));
        }
        if let Some(poi) = &pa.poi {
            match pa.posture {
                Posture::Sitting => {
                    out.insert(Triple(a.to_string(), SpatialRelation::SittingOn, poi.clone()));
                }
                Posture::Lying => {
                    out.insert(Triple(a.to_string(), SpatialRelation::LyingOn, poi.clone()));
                }
                Posture::Standing => {}
            }
        }
        if let Some(ev_id) = &pa.active_event {
            out.insert(Triple(a.to_string(), SpatialRelation::Performing, ev_id.clone()));
            let ev = g.event(ev_id).expect("active events exist");
            if is_interaction(ev) {
                if let Some(other) = other_actor(g, ev) {
                    let (x, y) = if a.as_str() < other { (a.as_str(), other) } else { (other, a.as_str()) };
                    out.insert(Triple(x.to_string(), SpatialRelation::InteractingWith, y.to_string()));
                }
            }
        }
    }
    out.into_iter().collect()
}

pub fn execute(g: &GestGraph, s: &Schedule, reg: &CapabilityRegistry) -> Result<ExecutionTrace, ExecError> {
    let states = simulate(g, s, reg)?;
    let frames = states
        .iter()
        .map(|w| FrameRelations {
            frame: w.frame,
            relations: relations(g, w),
        })
        .collect();
    Ok(ExecutionTrace {
        fps: s.fps,
        frames,
        frame_map: s.events.iter().map(|(id, ev)| (id.clone(), ev.frames)).collect(),
        description: describe(g, s, reg),
        sampled_frames: sample_frames(g, s, 10),
    })
}

fn display_name(g: &GestGraph, id: &str) -> String {
    g.node(id)
        .and_then(|n| n.actor())
        .map_or_else(|| id.to_string(), |a| a.name.clone())
}

/// One sentence per recorded event, in schedule order.
pub fn describe(g: &GestGraph, s: &Schedule, reg: &CapabilityRegistry) -> String {
    let recorded = recorded_events(g);
    let mut sentences = Vec::new();
    for id in s.ordered_events(g) {
        if !recorded.contains(id) {
            continue;
        }
        let ev = g.event(id).expect("ordered ids are events");
        let template = reg
            .action(&ev.action)
            .map_or("{actor} performs an action.", |a| a.description_template.as_str());
        let object = object_entities(g, ev)
            .next()
            .and_then(|o| g.node(o))
            .and_then(|n| n.object())
            .map(|o| o.object_type.clone())
            .unwrap_or_else(|| "object".to_string());
        let poi = ev
            .location
            .poi
            .as_deref()
            .and_then(|p| reg.poi(p))
            .map_or_else(|| "spot".to_string(), |p| p.name.clone());
        let region = reg
            .region(&ev.location.region)
            .map_or_else(|| ev.location.region.clone(), |r| r.name.clone());
        let other = other_actor(g, ev).map(|o| display_name(g, o)).unwrap_or_default();
        sentences.push(
            template
                .replace("{actor}", &display_name(g, &ev.performer))
                .replace("{poi}", &poi)
                .replace("{region}", &region)
                .replace("{object}", &object)
                .replace("{other}", &other),
        );
    }
    sentences.join(" ")
}

/// Hybrid key-frame sampling: midpoints of recorded events first (schedule
/// order, deduplicated), then frames on the one-per-time-unit grid spread
/// evenly over the remaining slots, then any other frames if still short.
/// Returns `min(n, total frames)` sorted indices.
pub fn sample_frames(g: &GestGraph, s: &Schedule, n: usize) -> Vec<i64> {
    let total = s.total_frames().max(0);
    let want = n.min(usize::try_from(total).unwrap_or(usize::MAX));
    let recorded = recorded_events(g);
    let mut chosen = BTreeSet::new();
    for id in s.ordered_events(g) {
        if chosen.len() == want {
            break;
        }
        if recorded.contains(id) {
            let [f0, f1] = s.get(id).expect("ordered ids are scheduled").frames;
            chosen.insert(f0 + (f1 - f0) / 2);
        }
    }
    let fps = i64::from(s.fps.max(1));
    let grid: Vec<i64> = (0..s.makespan)
        .map(|k| k * fps)
        .filter(|f| !chosen.contains(f))
        .collect();
    let missing = want - chosen.len();
    if missing > 0 && !grid.is_empty() {
        let take = missing.min(grid.len());
        for i in 0..take {
            chosen.insert(grid[i * grid.len() / take]);
        }
    }
    let mut f = 0;
    while chosen.len() < want {
        chosen.insert(f);
        f += 1;
    }
    chosen.into_iter().collect()
}

/// Writes `relations.jsonl`, `frame_map.json`, `description.txt` and
/// `sampled_frames.json` into `dir`.
pub fn write_trace(trace: &ExecutionTrace, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut rel = io::BufWriter::new(fs::File::create(dir.join("relations.jsonl"))?);
    for fr in &trace.frames {
        serde_json::to_writer(&mut rel, fr)?;
        rel.write_all(b"\n")?;
    }
    rel.flush()?;
    fs::write(dir.join("frame_map.json"), serde_json::to_string_pretty(&trace.frame_map)?)?;
    fs::write(dir.join("description.txt"), format!("{}\n", trace.description))?;
    fs::write(
        dir.join("sampled_frames.json"),
        serde_json::to_string(&trace.sampled_frames)?,
    )?;
    Ok(())
}
