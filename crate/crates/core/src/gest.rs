//! Graph of Events in Space and Time: node/edge model and its JSON form.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::Gender;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_narrative: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene_id: String,
    pub episode_id: String,
    pub region_id: String,
    pub actor_ids: Vec<String>,
    #[serde(default)]
    pub narrative: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorDecl {
    pub name: String,
    pub gender: Gender,
    pub skin_id: String,
    pub start_region: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDecl {
    pub object_type: String,
    pub chain_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventNode {
    pub action: String,
    pub performer: String,
    #[serde(default)]
    pub entities: Vec<String>,
    pub location: Location,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub properties: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_id: Option<String>,
    #[serde(default)]
    pub round_index: u32,
    #[serde(default)]
    pub recorded: bool,
    /// Chain that produced the event; absent for interactions and moves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    ExistsActor(ActorDecl),
    ExistsObject(ObjectDecl),
    Event(EventNode),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestNode {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl GestNode {
    pub fn event(&self) -> Option<&EventNode> {
        match &self.kind {
            NodeKind::Event(e) => Some(e),
            _ => None,
        }
    }

    pub fn actor(&self) -> Option<&ActorDecl> {
        match &self.kind {
            NodeKind::ExistsActor(a) => Some(a),
            _ => None,
        }
    }

    pub fn object(&self) -> Option<&ObjectDecl> {
        match &self.kind {
            NodeKind::ExistsObject(o) => Some(o),
            _ => None,
        }
    }
}

/// Temporal relations in canonical form. `after` only exists on the wire and
/// is turned into a reversed `Before` when parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalRelation {
    Before,
    SameTime,
    Concurrent,
    StartsWith,
}

impl TemporalRelation {
    pub fn as_str(self) -> &'static str {
        match self {
            TemporalRelation::Before => "before",
            TemporalRelation::SameTime => "same_time",
            TemporalRelation::Concurrent => "concurrent",
            TemporalRelation::StartsWith => "starts_with",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicalRelation {
    Causes,
    Enables,
    Prevents,
    Requires,
}

impl LogicalRelation {
    pub const ALL: [LogicalRelation; 4] = [
        LogicalRelation::Causes,
        LogicalRelation::Enables,
        LogicalRelation::Prevents,
        LogicalRelation::Requires,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LogicalRelation::Causes => "causes",
            LogicalRelation::Enables => "enables",
            LogicalRelation::Prevents => "prevents",
            LogicalRelation::Requires => "requires",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Temporal(TemporalRelation),
    Logical(LogicalRelation),
    Semantic(String),
}

impl Relation {
    pub fn category(&self) -> &'static str {
        match self {
            Relation::Temporal(_) => "temporal",
            Relation::Logical(_) => "logical",
            Relation::Semantic(_) => "semantic",
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Relation::Temporal(t) => t.as_str(),
            Relation::Logical(l) => l.as_str(),
            Relation::Semantic(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEdge", into = "RawEdge")]
pub struct GestEdge {
    pub from: String,
    pub to: String,
    pub relation: Relation,
}

impl GestEdge {
    pub fn temporal(from: impl Into<String>, to: impl Into<String>, rel: TemporalRelation) -> Self {
        GestEdge {
            from: from.into(),
            to: to.into(),
            relation: Relation::Temporal(rel),
        }
    }

    pub fn before(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self::temporal(from, to, TemporalRelation::Before)
    }

    /// `after(a, b)` is stored as `before(b, a)`.
    pub fn after(a: impl Into<String>, b: impl Into<String>) -> Self {
        Self::temporal(b, a, TemporalRelation::Before)
    }

    pub fn temporal_relation(&self) -> Option<TemporalRelation> {
        match self.relation {
            Relation::Temporal(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_before(&self) -> bool {
        self.temporal_relation() == Some(TemporalRelation::Before)
    }
}

#[derive(Serialize, Deserialize)]
struct RawEdge {
    from: String,
    to: String,
    category: String,
    relation: String,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct EdgeParseError(String);

impl TryFrom<RawEdge> for GestEdge {
    type Error = EdgeParseError;

    fn try_from(raw: RawEdge) -> Result<Self, Self::Error> {
        let RawEdge {
            from,
            to,
            category,
            relation,
        } = raw;
        let (from, to, relation) = match category.as_str() {
            "temporal" => match relation.as_str() {
                "before" => (from, to, Relation::Temporal(TemporalRelation::Before)),
                "after" => (to, from, Relation::Temporal(TemporalRelation::Before)),
                "same_time" => (from, to, Relation::Temporal(TemporalRelation::SameTime)),
                "concurrent" => (from, to, Relation::Temporal(TemporalRelation::Concurrent)),
                "starts_with" => (from, to, Relation::Temporal(TemporalRelation::StartsWith)),
                other => return Err(EdgeParseError(format!("unknown temporal relation '{other}'"))),
            },
            "logical" => match LogicalRelation::parse(&relation) {
                Some(l) => (from, to, Relation::Logical(l)),
                None => {
                    return Err(EdgeParseError(format!("unknown logical relation '{relation}'")))
                }
            },
            "semantic" => {
                if relation.trim().is_empty() {
                    return Err(EdgeParseError("semantic relation text is empty".into()));
                }
                (from, to, Relation::Semantic(relation))
            }
            other => return Err(EdgeParseError(format!("unknown edge category '{other}'"))),
        };
        Ok(GestEdge { from, to, relation })
    }
}

impl From<GestEdge> for RawEdge {
    fn from(e: GestEdge) -> Self {
        RawEdge {
            category: e.relation.category().to_string(),
            relation: e.relation.name().to_string(),
            from: e.from,
            to: e.to,
        }
    }
}

#[derive(Debug, Error)]
pub enum GestError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestGraph {
    #[serde(default)]
    pub meta: GestMeta,
    #[serde(default)]
    pub scenes: Vec<SceneMeta>,
    #[serde(default)]
    pub nodes: Vec<GestNode>,
    #[serde(default)]
    pub edges: Vec<GestEdge>,
}

/// A 64-bit fingerprint; FNV-1a over a canonical byte serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Fingerprint {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        let mut h = FnvHasher::default();
        h.write(bytes);
        Fingerprint(h.finish())
    }
}

impl GestGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn serialize(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("graph serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization is infallible")
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, GestError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| GestError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, GestError> {
        Self::deserialize(text.as_bytes())
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of_bytes(&serde_json::to_vec(self).expect("graph serialization is infallible"))
    }

    pub fn node(&self, id: &str) -> Option<&GestNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_index(&self) -> HashMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect()
    }

    pub fn events(&self) -> impl Iterator<Item = (&str, &EventNode)> {
        self.nodes
            .iter()
            .filter_map(|n| n.event().map(|e| (n.id.as_str(), e)))
    }

    pub fn actors(&self) -> impl Iterator<Item = (&str, &ActorDecl)> {
        self.nodes
            .iter()
            .filter_map(|n| n.actor().map(|a| (n.id.as_str(), a)))
    }

    pub fn event(&self, id: &str) -> Option<&EventNode> {
        self.node(id).and_then(GestNode::event)
    }

    pub fn event_count(&self) -> usize {
        self.events().count()
    }

    pub fn temporal_edges(&self) -> impl Iterator<Item = (&GestEdge, TemporalRelation)> {
        self.edges
            .iter()
            .filter_map(|e| e.temporal_relation().map(|t| (e, t)))
    }

    pub fn scene(&self, id: &str) -> Option<&SceneMeta> {
        self.scenes.iter().find(|s| s.scene_id == id)
    }
}
