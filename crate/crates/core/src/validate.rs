//! Standalone validation of GEST files against a registry.
//!
//! Structural references are checked first, then the temporal structure
//! (cycles, solvability), then every actor's events are replayed in schedule
//! order through the same rules the session backend enforces.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cover::{select_episodes, CoverError};
use crate::gest::{GestGraph, NodeKind, Relation, TemporalRelation};
use crate::registry::{CapabilityRegistry, MOVE_ACTION};
use crate::rules::{
    apply_chain_action, apply_interaction, check_interaction, ActorState, ChainProgress, LastUnit,
    StepViolation,
};
use crate::registry::Posture;
use crate::schedule::{build_constraints, solve, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationCode {
    #[serde(rename = "E_UNKNOWN_ACTION")]
    UnknownAction,
    #[serde(rename = "E_INVALID_CHAIN")]
    InvalidChain,
    #[serde(rename = "E_LIFECYCLE")]
    Lifecycle,
    #[serde(rename = "E_CYCLE")]
    Cycle,
    #[serde(rename = "E_CAPACITY")]
    Capacity,
    #[serde(rename = "E_INTERACTION")]
    Interaction,
    #[serde(rename = "E_REF")]
    Ref,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnknownAction => "E_UNKNOWN_ACTION",
            ViolationCode::InvalidChain => "E_INVALID_CHAIN",
            ViolationCode::Lifecycle => "E_LIFECYCLE",
            ViolationCode::Cycle => "E_CYCLE",
            ViolationCode::Capacity => "E_CAPACITY",
            ViolationCode::Interaction => "E_INTERACTION",
            ViolationCode::Ref => "E_REF",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Node id, or `edges[i]` for an edge.
    pub target: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub selected_episodes: BTreeSet<String>,
}

impl ValidationReport {
    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

struct Checker<'a> {
    g: &'a GestGraph,
    reg: &'a CapabilityRegistry,
    violations: Vec<Violation>,
    /// Events whose references are broken; replay skips them.
    skip: HashSet<&'a str>,
    /// Skipped non-chain events whose only fault is an unknown action. Replay
    /// assumes the performer ends up at the event's region.
    opaque: HashSet<&'a str>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, code: ViolationCode, target: impl Into<Option<String>>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            target: target.into(),
            message: message.into(),
        });
    }
}

pub fn validate(g: &GestGraph, reg: &CapabilityRegistry) -> ValidationReport {
    let mut c = Checker {
        g,
        reg,
        violations: Vec::new(),
        skip: HashSet::new(),
        opaque: HashSet::new(),
    };
    check_references(&mut c);
    let schedule = check_temporal(&mut c);
    if let Some(s) = &schedule {
        check_actor_overlap(&mut c, s);
    }
    replay(&mut c, schedule.as_ref());

    let selected_episodes = match select_episodes(g, reg) {
        Ok(eps) => eps,
        Err(CoverError::UncoverableRegion(r)) => {
            c.report(ViolationCode::Ref, None, format!("region '{r}' is not part of any episode"));
            BTreeSet::new()
        }
    };
    ValidationReport {
        ok: c.violations.is_empty(),
        violations: c.violations,
        selected_episodes,
    }
}

fn check_references(c: &mut Checker<'_>) {
    let g = c.g;
    let reg = c.reg;
    let mut ids = HashSet::new();
    for n in &g.nodes {
        if !ids.insert(n.id.as_str()) {
            c.report(ViolationCode::Ref, n.id.clone(), format!("duplicate node id '{}'", n.id));
        }
    }
    let index = g.node_index();
    let is_actor = |id: &str| index.get(id).is_some_and(|&i| g.nodes[i].actor().is_some());

    let mut scene_ids = HashSet::new();
    for s in &g.scenes {
        if !scene_ids.insert(s.scene_id.as_str()) {
            c.report(ViolationCode::Ref, s.scene_id.clone(), "duplicate scene id");
        }
        match reg.episode(&s.episode_id) {
            None => c.report(ViolationCode::Ref, s.scene_id.clone(), format!("unknown episode '{}'", s.episode_id)),
            Some(ep) if !ep.region_ids.contains(&s.region_id) => c.report(
                ViolationCode::Ref,
                s.scene_id.clone(),
                format!("region '{}' is not in episode '{}'", s.region_id, s.episode_id),
            ),
            Some(_) => {}
        }
        for a in &s.actor_ids {
            if !is_actor(a) {
                c.report(ViolationCode::Ref, s.scene_id.clone(), format!("scene lists unknown actor '{a}'"));
            }
        }
    }

    for n in &g.nodes {
        match &n.kind {
            NodeKind::ExistsActor(a) => {
                match reg.skin(&a.skin_id) {
                    None => c.report(ViolationCode::Ref, n.id.clone(), format!("unknown skin '{}'", a.skin_id)),
                    Some(s) if s.gender != a.gender => c.report(
                        ViolationCode::Ref,
                        n.id.clone(),
                        format!("skin '{}' does not match gender {}", a.skin_id, a.gender.as_str()),
                    ),
                    Some(_) => {}
                }
                if reg.region(&a.start_region).is_none() {
                    c.report(ViolationCode::Ref, n.id.clone(), format!("unknown region '{}'", a.start_region));
                }
            }
            NodeKind::ExistsObject(o) => {
                if o.chain_id.is_empty() {
                    c.report(ViolationCode::Ref, n.id.clone(), "object has no creating chain");
                }
            }
            NodeKind::Event(e) => {
                let mut broken = false;
                if !is_actor(&e.performer) {
                    c.report(ViolationCode::Ref, n.id.clone(), format!("performer '{}' is not a declared actor", e.performer));
                    broken = true;
                }
                for ent in &e.entities {
                    if !index.contains_key(ent.as_str()) {
                        c.report(ViolationCode::Ref, n.id.clone(), format!("unknown entity '{ent}'"));
                        broken = true;
                    }
                }
                if reg.region(&e.location.region).is_none() {
                    c.report(ViolationCode::Ref, n.id.clone(), format!("unknown region '{}'", e.location.region));
                    broken = true;
                }
                if let Some(p) = &e.location.poi {
                    match reg.poi(p) {
                        Some(poi) if poi.region_id == e.location.region => {}
                        Some(_) => {
                            c.report(ViolationCode::Ref, n.id.clone(), format!("POI '{p}' is not in region '{}'", e.location.region));
                            broken = true;
                        }
                        None => {
                            c.report(ViolationCode::Ref, n.id.clone(), format!("unknown POI '{p}'"));
                            broken = true;
                        }
                    }
                }
                match &e.scene_id {
                    Some(sid) => match g.scene(sid) {
                        None => {
                            c.report(ViolationCode::Ref, n.id.clone(), format!("unknown scene '{sid}'"));
                            broken = true;
                        }
                        Some(scene) => {
                            if scene.region_id != e.location.region {
                                c.report(ViolationCode::Ref, n.id.clone(), format!("event is outside scene region '{}'", scene.region_id));
                            }
                            if !scene.actor_ids.contains(&e.performer) {
                                c.report(ViolationCode::Ref, n.id.clone(), format!("'{}' is not part of scene '{sid}'", e.performer));
                            }
                        }
                    },
                    None if e.recorded => {
                        c.report(ViolationCode::Ref, n.id.clone(), "recorded event belongs to no scene");
                    }
                    None => {}
                }
                if reg.action(&e.action).is_none() {
                    c.report(ViolationCode::UnknownAction, n.id.clone(), format!("unknown action '{}'", e.action));
                    if !broken && e.chain_id.is_none() {
                        c.opaque.insert(n.id.as_str());
                    }
                    broken = true;
                }
                if broken {
                    c.skip.insert(n.id.as_str());
                }
            }
        }
    }

    for (i, e) in g.edges.iter().enumerate() {
        let target = format!("edges[{i}]");
        let (Some(&fi), Some(&ti)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
            c.report(ViolationCode::Ref, target, format!("edge {} -> {} has a dangling endpoint", e.from, e.to));
            continue;
        };
        if g.nodes[fi].event().is_none() || g.nodes[ti].event().is_none() {
            c.report(ViolationCode::Ref, target, "relations must connect two events");
            continue;
        }
        if e.from == e.to {
            let code = match e.relation {
                Relation::Temporal(_) => ViolationCode::Cycle,
                _ => ViolationCode::Ref,
            };
            c.report(code, target, format!("event '{}' is related to itself", e.from));
        }
    }
}

/// Cycle detection on the `before` subgraph, then a solve of the full
/// constraint system. Returns the schedule when one exists.
fn check_temporal(c: &mut Checker<'_>) -> Option<Schedule> {
    let g = c.g;
    let events: Vec<&str> = g.events().map(|(id, _)| id).collect();
    let pos: HashMap<&str, usize> = events.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut succ = vec![Vec::new(); events.len()];
    for e in g.edges.iter().filter(|e| e.is_before() && e.from != e.to) {
        if let (Some(&a), Some(&b)) = (pos.get(e.from.as_str()), pos.get(e.to.as_str())) {
            succ[a].push(b);
        }
    }
    let mut cyclic = false;
    for scc in strongly_connected(&succ) {
        if scc.len() > 1 {
            cyclic = true;
            let mut names: Vec<&str> = scc.iter().map(|&i| events[i]).collect();
            names.sort();
            c.report(
                ViolationCode::Cycle,
                names[0].to_string(),
                format!("before-cycle through {}", names.join(", ")),
            );
        }
    }
    if cyclic || c.violations.iter().any(|v| v.code == ViolationCode::Cycle) {
        return None;
    }
    match solve(&build_constraints(g, c.reg)) {
        Ok(s) => Some(s),
        Err(inf) => {
            c.report(
                ViolationCode::Cycle,
                inf.cycle.first().cloned(),
                format!("temporal constraints are unsatisfiable around {}", inf.cycle.join(" -> ")),
            );
            None
        }
    }
}

/// Tarjan's algorithm, iterative.
fn strongly_connected(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 && index[v] == usize::MAX {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *child < succ[v].len() {
                let w = succ[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(comp);
            }
        }
    }
    out
}

fn check_actor_overlap(c: &mut Checker<'_>, s: &Schedule) {
    let mut per_actor: BTreeMap<&str, Vec<(i64, i64, &str)>> = BTreeMap::new();
    for (id, e) in c.g.events() {
        if let Some(iv) = s.get(id) {
            per_actor.entry(e.performer.as_str()).or_default().push((iv.start, iv.end, id));
        }
    }
    let mut found = Vec::new();
    for (actor, mut evs) in per_actor {
        evs.sort();
        for w in evs.windows(2) {
            if w[1].0 < w[0].1 {
                found.push((w[1].2.to_string(), format!("{actor} performs '{}' and '{}' at the same time", w[0].2, w[1].2)));
            }
        }
    }
    for (target, msg) in found {
        c.report(ViolationCode::Capacity, target, msg);
    }
}

struct OpenChain {
    progress: ChainProgress,
    first_start: i64,
    last_end: i64,
    last_event: String,
    broken: bool,
    /// Exclusive POI occupancy began with this chain.
    claims: bool,
}

/// Occupancy of one exclusive POI by one actor: `[start, end)` in time units.
struct Span {
    actor: String,
    start: i64,
    end: i64,
    poi: String,
}

struct Replay<'a> {
    actors: BTreeMap<String, ActorState>,
    open: HashMap<String, OpenChain>,
    seen_chains: HashSet<String>,
    existing_instances: HashSet<String>,
    /// Seated occupancy start per actor, while they stay at an exclusive POI.
    seated_since: HashMap<String, (String, i64)>,
    spans: Vec<Span>,
    done_pairs: HashSet<&'a str>,
}

fn replay(c: &mut Checker<'_>, schedule: Option<&Schedule>) {
    let g = c.g;
    let mut order: Vec<(i64, usize, &str)> = g
        .events()
        .enumerate()
        .filter(|(_, (id, _))| !c.skip.contains(id) || c.opaque.contains(id))
        .map(|(i, (id, _))| (schedule.and_then(|s| s.get(id)).map_or(0, |s| s.start), i, id))
        .collect();
    order.sort();
    let interval = |id: &str| schedule.and_then(|s| s.get(id)).map(|iv| (iv.start, iv.end));

    let mut st = Replay {
        actors: g
            .actors()
            .map(|(id, a)| {
                (
                    id.to_string(),
                    ActorState::new(id, &a.name, a.gender, &a.skin_id, &a.start_region),
                )
            })
            .collect(),
        open: HashMap::new(),
        seen_chains: HashSet::new(),
        existing_instances: HashSet::new(),
        seated_since: HashMap::new(),
        spans: Vec::new(),
        done_pairs: HashSet::new(),
    };

    // same_time partners of interaction events
    let mut partner: HashMap<&str, &str> = HashMap::new();
    for (e, rel) in g.temporal_edges() {
        if rel == TemporalRelation::SameTime {
            let (a, b) = (e.from.as_str(), e.to.as_str());
            let both_interactions = [a, b].iter().all(|id| {
                g.event(id).is_some_and(|ev| ev.chain_id.is_none() && ev.action != MOVE_ACTION)
            });
            if both_interactions && a != b {
                partner.insert(a, b);
                partner.insert(b, a);
            }
        }
    }

    for &(_, _, id) in &order {
        let ev = g.event(id).expect("ordered ids are events");
        let actor_id = ev.performer.as_str();
        if ev.chain_id.is_none() {
            close_chain(c, &mut st, actor_id, interval(id).map(|iv| iv.0));
        }
        if c.opaque.contains(id) {
            let actor = st.actors.get_mut(actor_id).expect("performer checked");
            actor.region_id = ev.location.region.clone();
            continue;
        }
        if let Some(chain_id) = &ev.chain_id {
            play_chain_event(c, &mut st, id, chain_id, interval(id));
        } else if ev.action == MOVE_ACTION {
            let actor = st.actors.get_mut(actor_id).expect("performer checked");
            if actor.posture != Posture::Standing {
                c.report(ViolationCode::InvalidChain, id.to_string(), format!("{actor_id} moves while {}", actor.posture.as_str()));
            } else if actor.region_id == ev.location.region {
                c.report(ViolationCode::InvalidChain, id.to_string(), format!("{actor_id} is already in '{}'", ev.location.region));
            } else {
                actor.region_id = ev.location.region.clone();
            }
        } else {
            if st.done_pairs.contains(id) {
                continue;
            }
            play_interaction(c, &mut st, id, partner.get(id).copied(), &interval);
        }
    }
    let remaining: Vec<String> = st.open.keys().cloned().collect();
    for actor in remaining {
        close_chain(c, &mut st, &actor, None);
    }
    for (actor, (poi, start)) in std::mem::take(&mut st.seated_since) {
        st.spans.push(Span {
            actor,
            start,
            end: i64::MAX,
            poi,
        });
    }

    if schedule.is_some() {
        st.spans.sort_by(|a, b| (a.poi.as_str(), a.start).cmp(&(b.poi.as_str(), b.start)));
        let mut clashes = Vec::new();
        for (i, a) in st.spans.iter().enumerate() {
            for b in &st.spans[i + 1..] {
                if a.poi == b.poi && a.actor != b.actor && a.start < b.end && b.start < a.end {
                    clashes.push(format!(
                        "{} and {} use exclusive POI '{}' at the same time",
                        a.actor, b.actor, a.poi
                    ));
                }
            }
        }
        for msg in clashes {
            c.report(ViolationCode::Capacity, None, msg);
        }
    }
}

fn close_chain(c: &mut Checker<'_>, st: &mut Replay<'_>, actor_id: &str, _now: Option<i64>) {
    let Some(chain) = st.open.remove(actor_id) else {
        return;
    };
    let reg = c.reg;
    let poi = reg.poi(&chain.progress.poi_id).expect("chain POIs are checked");
    if !chain.broken && !chain.progress.may_end(poi) {
        let why = if chain.progress.lock.is_some() {
            "ends in the middle of a spawnable sequence".to_string()
        } else {
            format!(
                "ends on non-terminal action '{}'",
                chain.progress.cursor.as_deref().unwrap_or("")
            )
        };
        c.report(
            ViolationCode::InvalidChain,
            chain.last_event.clone(),
            format!("chain '{}' {why}", chain.progress.chain_id),
        );
    }
    if poi.exclusive {
        let actor = &st.actors[actor_id];
        let still_seated = actor.seated_poi.as_deref() == Some(poi.id.as_str());
        let start = if chain.claims {
            chain.first_start
        } else {
            st.seated_since
                .get(actor_id)
                .map_or(chain.first_start, |(_, s)| *s)
        };
        if still_seated {
            st.seated_since.insert(actor_id.to_string(), (poi.id.clone(), start));
        } else {
            st.seated_since.remove(actor_id);
            st.spans.push(Span {
                actor: actor_id.to_string(),
                start,
                end: chain.last_end,
                poi: poi.id.clone(),
            });
        }
    }
}

fn play_chain_event(
    c: &mut Checker<'_>,
    st: &mut Replay<'_>,
    id: &str,
    chain_id: &str,
    interval: Option<(i64, i64)>,
) {
    let g = c.g;
    let reg = c.reg;
    let ev = g.event(id).expect("is an event");
    let actor_id = ev.performer.as_str();
    let (start, end) = interval.unwrap_or((0, 0));

    let Some(poi_id) = ev.location.poi.as_deref() else {
        c.report(ViolationCode::Ref, id.to_string(), "chain event has no POI");
        return;
    };
    let poi = reg.poi(poi_id).expect("POI checked");

    let continuing = st
        .open
        .get(actor_id)
        .is_some_and(|ch| ch.progress.chain_id == chain_id);
    if !continuing {
        close_chain(c, st, actor_id, Some(start));
        let actor = &st.actors[actor_id];
        let mut broken = false;
        if !st.seen_chains.insert(chain_id.to_string()) {
            c.report(ViolationCode::InvalidChain, id.to_string(), format!("chain '{chain_id}' is interrupted and continued later"));
            broken = true;
        } else if actor.region_id != poi.region_id {
            c.report(
                ViolationCode::InvalidChain,
                id.to_string(),
                format!("{actor_id} is in '{}', not at '{}'", actor.region_id, poi.region_id),
            );
            broken = true;
        } else if actor.posture != Posture::Standing && actor.seated_poi.as_deref() != Some(poi_id) {
            c.report(
                ViolationCode::InvalidChain,
                id.to_string(),
                format!("{actor_id} starts a chain at '{poi_id}' while {}", actor.posture.as_str()),
            );
            broken = true;
        }
        let progress = ChainProgress::start(chain_id, poi, actor);
        let claims = !progress.resumed;
        st.open.insert(
            actor_id.to_string(),
            OpenChain {
                progress,
                first_start: start,
                last_end: end,
                last_event: id.to_string(),
                broken,
                claims,
            },
        );
    }

    let chain = st.open.get_mut(actor_id).expect("opened above");
    chain.last_end = end;
    chain.last_event = id.to_string();
    if chain.broken {
        return;
    }
    if ev.location.poi.as_deref() != Some(chain.progress.poi_id.as_str()) {
        chain.broken = true;
        c.report(ViolationCode::InvalidChain, id.to_string(), format!("chain '{chain_id}' changes POI"));
        return;
    }
    let actor = st.actors.get_mut(actor_id).expect("performer checked");
    match apply_chain_action(reg, poi, &mut chain.progress, actor, &ev.action) {
        Ok(effect) => {
            if let Some(obj) = &effect.acquired {
                let declared = g
                    .node(&obj.instance_id)
                    .and_then(|n| n.object())
                    .is_some_and(|o| o.object_type == obj.object_type && o.chain_id == chain_id);
                if !declared || !ev.entities.contains(&obj.instance_id) {
                    c.report(
                        ViolationCode::Lifecycle,
                        id.to_string(),
                        format!("acquired instance '{}' is not declared by an Exists node of this chain", obj.instance_id),
                    );
                }
                if !st.existing_instances.insert(obj.instance_id.clone()) {
                    c.report(ViolationCode::Lifecycle, id.to_string(), format!("instance '{}' is acquired twice", obj.instance_id));
                }
            }
            if let Some(obj) = &effect.released {
                if !ev.entities.contains(&obj.instance_id) {
                    c.report(
                        ViolationCode::Lifecycle,
                        id.to_string(),
                        format!("put-down does not name the released instance '{}'", obj.instance_id),
                    );
                }
            }
        }
        Err(v) => {
            chain.broken = true;
            let code = match v {
                StepViolation::NothingToRelease { .. } | StepViolation::ReleaseOutsideOrigin { .. } => {
                    ViolationCode::Lifecycle
                }
                _ => ViolationCode::InvalidChain,
            };
            c.report(code, id.to_string(), v.to_string());
        }
    }
    if let Some(a) = st.actors.get_mut(actor_id) {
        a.last_unit = LastUnit::Chain;
    }
}

fn play_interaction<'a>(
    c: &mut Checker<'a>,
    st: &mut Replay<'a>,
    id: &'a str,
    partner: Option<&'a str>,
    interval: &dyn Fn(&str) -> Option<(i64, i64)>,
) {
    let g = c.g;
    let reg = c.reg;
    let ev = g.event(id).expect("is an event");
    let Some(other_id) = partner else {
        c.report(ViolationCode::Interaction, id.to_string(), format!("'{}' has no synchronized partner event", ev.action));
        return;
    };
    st.done_pairs.insert(id);
    st.done_pairs.insert(other_id);
    let other = g.event(other_id).expect("partners are events");
    close_chain(c, st, &other.performer, interval(other_id).map(|iv| iv.0));

    let itype = reg.interactions().iter().find(|t| {
        (ev.action == t.name && other.action == t.receiver_action())
            || (other.action == t.name && ev.action == t.receiver_action())
    });
    let Some(itype) = itype else {
        c.report(
            ViolationCode::Interaction,
            id.to_string(),
            format!("'{}'/'{}' is not an interaction pair", ev.action, other.action),
        );
        return;
    };
    let (giver_ev, receiver_ev) = if ev.action == itype.name { (ev, other) } else { (other, ev) };
    if giver_ev.performer == receiver_ev.performer {
        c.report(ViolationCode::Interaction, id.to_string(), "an actor cannot interact with themselves");
        return;
    }
    let transfer = if itype.requires_transfer {
        giver_ev
            .entities
            .iter()
            .find(|e| g.node(e).is_some_and(|n| n.object().is_some()))
            .map(String::as_str)
    } else {
        None
    };
    let giver = st.actors[&giver_ev.performer].clone();
    let receiver = st.actors[&receiver_ev.performer].clone();
    if let Err(v) = check_interaction(reg, &giver, &receiver, itype, transfer) {
        let code = match v.code() {
            crate::error::ErrorCode::Lifecycle => ViolationCode::Lifecycle,
            _ => ViolationCode::Interaction,
        };
        c.report(code, id.to_string(), v.to_string());
        return;
    }
    let mut giver = giver;
    let mut receiver = receiver;
    apply_interaction(&mut giver, &mut receiver, transfer);
    st.actors.insert(giver.actor_id.clone(), giver);
    st.actors.insert(receiver.actor_id.clone(), receiver);
}
