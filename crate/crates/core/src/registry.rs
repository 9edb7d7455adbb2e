//! The capability registry: everything the simulated world can do, plus the
//! read-only paginated exploration queries served to agents.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCode;

/// The desk-scale sample registry bundled with the crate.
pub const SAMPLE_REGISTRY_JSON: &str = include_str!("../data/sample_registry.json");

/// Action name used by `move_actors`.
pub const MOVE_ACTION: &str = "Move";

/// Prefix of the receiver-side action synthesized for transfer interactions.
pub const INVERSE_PREFIX: &str = "INV-";

pub const MAX_PAGE_SIZE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Standing,
    Sitting,
    Lying,
}

impl Posture {
    pub fn as_str(self) -> &'static str {
        match self {
            Posture::Standing => "standing",
            Posture::Sitting => "sitting",
            Posture::Lying => "lying",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub id: String,
    pub name: String,
    #[serde(rename = "regions")]
    pub region_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub name: String,
    #[serde(rename = "grid")]
    pub grid_pos: [i32; 2],
    #[serde(rename = "pois", default)]
    pub poi_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainAutomaton {
    #[serde(rename = "first")]
    pub first_actions: Vec<String>,
    #[serde(default)]
    pub next: BTreeMap<String, Vec<String>>,
    pub terminal: BTreeSet<String>,
}

impl ChainAutomaton {
    pub fn successors(&self, action: &str) -> &[String] {
        self.next.get(action).map(Vec::as_slice).unwrap_or(&[])
    }

    /// True if the action occurs anywhere in the automaton.
    pub fn mentions(&self, action: &str) -> bool {
        self.first_actions.iter().any(|a| a == action)
            || self.terminal.contains(action)
            || self
                .next
                .iter()
                .any(|(k, vs)| k == action || vs.iter().any(|v| v == action))
    }

    pub fn is_terminal(&self, action: &str) -> bool {
        self.terminal.contains(action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub name: String,
    #[serde(rename = "region")]
    pub region_id: String,
    #[serde(default)]
    pub exclusive: bool,
    #[serde(rename = "local", default)]
    pub local_pos: [i32; 2],
    pub automaton: ChainAutomaton,
}

/// A POI without its automaton, as listed by `get_pois`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiSummary {
    pub id: String,
    pub name: String,
    pub region_id: String,
    pub exclusive: bool,
    pub local_pos: [i32; 2],
}

fn default_duration() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    #[serde(default = "default_duration")]
    pub duration: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posture_pre: Option<Posture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posture_post: Option<Posture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquires: Option<String>,
    #[serde(default)]
    pub releases: bool,
    #[serde(rename = "template", default)]
    pub description_template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skin {
    pub id: String,
    pub gender: Gender,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpawnableType {
    pub name: String,
    /// Take-out, use and stash actions, in that order.
    pub sequence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionType {
    pub name: String,
    #[serde(default)]
    pub requires_transfer: bool,
}

impl InteractionType {
    /// Action performed by the receiving side: `INV-Give` for `Give`, the
    /// interaction itself for symmetric ones.
    pub fn receiver_action(&self) -> String {
        if self.requires_transfer {
            format!("{INVERSE_PREFIX}{}", self.name)
        } else {
            self.name.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NextActions {
    pub actions: Vec<String>,
    pub terminal: bool,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("reference error at {path}: {message}")]
    Ref { path: String, message: String },
}

impl RegistryError {
    fn reference(path: impl Into<String>, message: impl Into<String>) -> Self {
        RegistryError::Ref {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("{kind} '{id}' not found")]
    NotFound { kind: &'static str, id: String },
    #[error("action '{action}' does not occur at POI '{poi}'")]
    UnknownAction { poi: String, action: String },
    #[error("page {page} is out of range ({total} items, page size {page_size})")]
    Pagination {
        page: usize,
        page_size: usize,
        total: usize,
    },
}

impl QueryError {
    pub fn code(&self) -> ErrorCode {
        match self {
            QueryError::NotFound { .. } => ErrorCode::NotFound,
            QueryError::UnknownAction { .. } => ErrorCode::UnknownAction,
            QueryError::Pagination { .. } => ErrorCode::Pagination,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDocument {
    #[serde(default)]
    version: String,
    episodes: Vec<Episode>,
    regions: Vec<Region>,
    pois: Vec<Poi>,
    actions: Vec<ActionSpec>,
    skins: Vec<Skin>,
    #[serde(default)]
    spawnables: Vec<SpawnableType>,
    #[serde(default)]
    interactions: Vec<InteractionType>,
}

/// Immutable world catalog. Every list is kept sorted by id (or name), which
/// is also the pagination order.
#[derive(Debug, Clone)]
pub struct CapabilityRegistry {
    version: String,
    episodes: Vec<Episode>,
    regions: Vec<Region>,
    pois: Vec<Poi>,
    actions: Vec<ActionSpec>,
    skins: Vec<Skin>,
    spawnables: Vec<SpawnableType>,
    interactions: Vec<InteractionType>,
    episode_idx: HashMap<String, usize>,
    region_idx: HashMap<String, usize>,
    poi_idx: HashMap<String, usize>,
    action_idx: HashMap<String, usize>,
    skin_idx: HashMap<String, usize>,
    spawnable_idx: HashMap<String, usize>,
    interaction_idx: HashMap<String, usize>,
}

fn is_identifier(id: &str) -> bool {
    !id.is_empty()
        && id
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn index_by<T>(
    items: &[T],
    category: &str,
    key: impl Fn(&T) -> &str,
    check_identifier: bool,
) -> Result<HashMap<String, usize>, RegistryError> {
    let mut idx = HashMap::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let k = key(item);
        let path = format!("{category}[{i}]");
        if k.is_empty() {
            return Err(RegistryError::reference(path, "empty identifier"));
        }
        if check_identifier && !is_identifier(k) {
            return Err(RegistryError::reference(
                path,
                format!("id '{k}' must match [a-z0-9_]+"),
            ));
        }
        if idx.insert(k.to_string(), i).is_some() {
            return Err(RegistryError::reference(path, format!("duplicate id '{k}'")));
        }
    }
    Ok(idx)
}

impl CapabilityRegistry {
    pub fn from_reader(mut source: impl Read) -> Result<Self, RegistryError> {
        let mut text = String::new();
        source
            .read_to_string(&mut text)
            .map_err(|e| RegistryError::Parse {
                path: "$".into(),
                message: e.to_string(),
            })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, RegistryError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: RegistryDocument =
            serde_path_to_error::deserialize(de).map_err(|e| RegistryError::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Self::from_document(doc)
    }

    /// The bundled sample registry.
    pub fn sample() -> Self {
        Self::from_json_str(SAMPLE_REGISTRY_JSON).expect("bundled sample registry is valid")
    }

    fn from_document(doc: RegistryDocument) -> Result<Self, RegistryError> {
        let RegistryDocument {
            version,
            mut episodes,
            mut regions,
            mut pois,
            mut actions,
            mut skins,
            mut spawnables,
            mut interactions,
        } = doc;

        // Uniqueness and id syntax are checked against document order so that
        // error paths point into the source file.
        index_by(&episodes, "episodes", |e| &e.id, true)?;
        index_by(&regions, "regions", |r| &r.id, true)?;
        index_by(&pois, "pois", |p| &p.id, true)?;
        index_by(&actions, "actions", |a| &a.name, false)?;
        index_by(&skins, "skins", |s| &s.id, true)?;
        index_by(&spawnables, "spawnables", |s| &s.name, false)?;
        index_by(&interactions, "interactions", |s| &s.name, false)?;

        let action_names: HashSet<&str> = actions.iter().map(|a| a.name.as_str()).collect();
        let region_names: HashSet<&str> = regions.iter().map(|r| r.id.as_str()).collect();
        let poi_names: HashMap<&str, &Poi> = pois.iter().map(|p| (p.id.as_str(), p)).collect();

        for (i, a) in actions.iter().enumerate() {
            if a.duration == 0 {
                return Err(RegistryError::reference(
                    format!("actions[{i}].duration"),
                    "duration must be positive",
                ));
            }
            if a.acquires.is_some() && a.releases {
                return Err(RegistryError::reference(
                    format!("actions[{i}]"),
                    format!("action '{}' both acquires and releases", a.name),
                ));
            }
        }
        if !action_names.contains(MOVE_ACTION) {
            return Err(RegistryError::reference(
                "actions",
                format!("required action '{MOVE_ACTION}' is missing"),
            ));
        }

        for (i, e) in episodes.iter().enumerate() {
            if e.region_ids.is_empty() {
                return Err(RegistryError::reference(
                    format!("episodes[{i}].regions"),
                    "episode has no regions",
                ));
            }
            let mut seen = HashSet::new();
            for (j, r) in e.region_ids.iter().enumerate() {
                let path = format!("episodes[{i}].regions[{j}]");
                if !region_names.contains(r.as_str()) {
                    return Err(RegistryError::reference(path, format!("unknown region '{r}'")));
                }
                if !seen.insert(r) {
                    return Err(RegistryError::reference(path, format!("region '{r}' listed twice")));
                }
            }
        }

        let mut grids = HashMap::new();
        for (i, r) in regions.iter().enumerate() {
            if let Some(other) = grids.insert(r.grid_pos, &r.id) {
                return Err(RegistryError::reference(
                    format!("regions[{i}].grid"),
                    format!("grid position shared with region '{other}'"),
                ));
            }
            for (j, p) in r.poi_ids.iter().enumerate() {
                let path = format!("regions[{i}].pois[{j}]");
                match poi_names.get(p.as_str()) {
                    None => return Err(RegistryError::reference(path, format!("unknown POI '{p}'"))),
                    Some(poi) if poi.region_id != r.id => {
                        return Err(RegistryError::reference(
                            path,
                            format!("POI '{p}' belongs to region '{}'", poi.region_id),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }

        for (i, p) in pois.iter().enumerate() {
            let base = format!("pois[{i}]");
            let Some(region) = regions.iter().find(|r| r.id == p.region_id) else {
                return Err(RegistryError::reference(
                    format!("{base}.region"),
                    format!("unknown region '{}'", p.region_id),
                ));
            };
            if !region.poi_ids.contains(&p.id) {
                return Err(RegistryError::reference(
                    format!("{base}.region"),
                    format!("region '{}' does not list POI '{}'", region.id, p.id),
                ));
            }
            validate_automaton(&p.automaton, &action_names, &format!("{base}.automaton"))?;
        }

        for (i, s) in skins.iter().enumerate() {
            if s.description.trim().is_empty() {
                return Err(RegistryError::reference(
                    format!("skins[{i}].description"),
                    "skin description is empty",
                ));
            }
        }

        let action_of = |name: &str| actions.iter().find(|a| a.name == name);
        for (i, s) in spawnables.iter().enumerate() {
            let base = format!("spawnables[{i}].sequence");
            if s.sequence.len() != 3 {
                return Err(RegistryError::reference(
                    base,
                    "sequence must list exactly take-out, use and stash actions",
                ));
            }
            for (j, a) in s.sequence.iter().enumerate() {
                if !action_names.contains(a.as_str()) {
                    return Err(RegistryError::reference(
                        format!("{base}[{j}]"),
                        format!("unknown action '{a}'"),
                    ));
                }
            }
            let take_out = action_of(&s.sequence[0]).expect("checked above");
            if take_out.acquires.as_deref() != Some(s.name.as_str()) {
                return Err(RegistryError::reference(
                    format!("{base}[0]"),
                    format!("take-out action must acquire '{}'", s.name),
                ));
            }
            if !action_of(&s.sequence[2]).expect("checked above").releases {
                return Err(RegistryError::reference(
                    format!("{base}[2]"),
                    "stash action must release the object",
                ));
            }
        }

        for (i, it) in interactions.iter().enumerate() {
            let path = format!("interactions[{i}]");
            let Some(fwd) = action_of(&it.name) else {
                return Err(RegistryError::reference(
                    path,
                    format!("no action named '{}'", it.name),
                ));
            };
            if it.requires_transfer {
                let inv = it.receiver_action();
                match action_of(&inv) {
                    None => {
                        return Err(RegistryError::reference(path, format!("no action named '{inv}'")))
                    }
                    Some(a) if a.duration != fwd.duration => {
                        return Err(RegistryError::reference(
                            path,
                            format!("'{inv}' must have the same duration as '{}'", it.name),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }

        episodes.sort_by(|a, b| a.id.cmp(&b.id));
        regions.sort_by(|a, b| a.id.cmp(&b.id));
        pois.sort_by(|a, b| a.id.cmp(&b.id));
        actions.sort_by(|a, b| a.name.cmp(&b.name));
        skins.sort_by(|a, b| a.id.cmp(&b.id));
        spawnables.sort_by(|a, b| a.name.cmp(&b.name));
        interactions.sort_by(|a, b| a.name.cmp(&b.name));

        Ok(CapabilityRegistry {
            version,
            episode_idx: index_by(&episodes, "episodes", |e| &e.id, true)?,
            region_idx: index_by(&regions, "regions", |r| &r.id, true)?,
            poi_idx: index_by(&pois, "pois", |p| &p.id, true)?,
            action_idx: index_by(&actions, "actions", |a| &a.name, false)?,
            skin_idx: index_by(&skins, "skins", |s| &s.id, true)?,
            spawnable_idx: index_by(&spawnables, "spawnables", |s| &s.name, false)?,
            interaction_idx: index_by(&interactions, "interactions", |s| &s.name, false)?,
            episodes,
            regions,
            pois,
            actions,
            skins,
            spawnables,
            interactions,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn skins(&self) -> &[Skin] {
        &self.skins
    }

    pub fn spawnables(&self) -> &[SpawnableType] {
        &self.spawnables
    }

    pub fn interactions(&self) -> &[InteractionType] {
        &self.interactions
    }

    pub fn episode(&self, id: &str) -> Option<&Episode> {
        self.episode_idx.get(id).map(|&i| &self.episodes[i])
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.region_idx.get(id).map(|&i| &self.regions[i])
    }

    pub fn poi(&self, id: &str) -> Option<&Poi> {
        self.poi_idx.get(id).map(|&i| &self.pois[i])
    }

    pub fn action(&self, name: &str) -> Option<&ActionSpec> {
        self.action_idx.get(name).map(|&i| &self.actions[i])
    }

    pub fn skin(&self, id: &str) -> Option<&Skin> {
        self.skin_idx.get(id).map(|&i| &self.skins[i])
    }

    pub fn spawnable(&self, name: &str) -> Option<&SpawnableType> {
        self.spawnable_idx.get(name).map(|&i| &self.spawnables[i])
    }

    pub fn interaction(&self, name: &str) -> Option<&InteractionType> {
        self.interaction_idx.get(name).map(|&i| &self.interactions[i])
    }

    /// Duration of an action, 1 for names the registry does not know.
    pub fn duration_of(&self, action: &str) -> u32 {
        self.action(action).map_or(1, |a| a.duration)
    }

    /// Regions listed by one or more episodes.
    pub fn episodes_containing<'a>(&'a self, region_id: &'a str) -> impl Iterator<Item = &'a Episode> + 'a {
        self.episodes
            .iter()
            .filter(move |e| e.region_ids.iter().any(|r| r == region_id))
    }

    pub fn get_episodes(&self, page: usize, page_size: usize) -> Result<Page<Episode>, QueryError> {
        paginate(&self.episodes, page, page_size)
    }

    pub fn get_regions(
        &self,
        episode_id: &str,
        page: usize,
        page_size: usize,
    ) -> Result<Page<Region>, QueryError> {
        let ep = self.episode(episode_id).ok_or_else(|| QueryError::NotFound {
            kind: "episode",
            id: episode_id.to_string(),
        })?;
        let mut regions: Vec<Region> = ep
            .region_ids
            .iter()
            .filter_map(|r| self.region(r).cloned())
            .collect();
        regions.sort_by(|a, b| a.id.cmp(&b.id));
        paginate(&regions, page, page_size)
    }

    pub fn get_pois(
        &self,
        region_id: &str,
        page: usize,
        page_size: usize,
    ) -> Result<Page<PoiSummary>, QueryError> {
        let region = self.region(region_id).ok_or_else(|| QueryError::NotFound {
            kind: "region",
            id: region_id.to_string(),
        })?;
        let mut pois: Vec<PoiSummary> = region
            .poi_ids
            .iter()
            .filter_map(|p| self.poi(p))
            .map(|p| PoiSummary {
                id: p.id.clone(),
                name: p.name.clone(),
                region_id: p.region_id.clone(),
                exclusive: p.exclusive,
                local_pos: p.local_pos,
            })
            .collect();
        pois.sort_by(|a, b| a.id.cmp(&b.id));
        paginate(&pois, page, page_size)
    }

    fn require_poi(&self, poi_id: &str) -> Result<&Poi, QueryError> {
        self.poi(poi_id).ok_or_else(|| QueryError::NotFound {
            kind: "POI",
            id: poi_id.to_string(),
        })
    }

    pub fn get_poi_first_actions(&self, poi_id: &str) -> Result<Vec<String>, QueryError> {
        Ok(self.require_poi(poi_id)?.automaton.first_actions.clone())
    }

    pub fn get_next_actions(&self, poi_id: &str, action: &str) -> Result<NextActions, QueryError> {
        let poi = self.require_poi(poi_id)?;
        if !poi.automaton.mentions(action) {
            return Err(QueryError::UnknownAction {
                poi: poi_id.to_string(),
                action: action.to_string(),
            });
        }
        Ok(NextActions {
            actions: poi.automaton.successors(action).to_vec(),
            terminal: poi.automaton.is_terminal(action),
        })
    }

    pub fn get_skins(
        &self,
        gender: Gender,
        page: usize,
        page_size: usize,
    ) -> Result<Page<Skin>, QueryError> {
        let skins: Vec<Skin> = self
            .skins
            .iter()
            .filter(|s| s.gender == gender)
            .cloned()
            .collect();
        paginate(&skins, page, page_size)
    }

    pub fn get_spawnable_types(&self) -> Vec<SpawnableType> {
        self.spawnables.clone()
    }

    pub fn get_interaction_types(&self) -> Vec<InteractionType> {
        self.interactions.clone()
    }

    /// Constraint documentation for agents, listing every error code.
    pub fn get_simulation_rules(&self) -> String {
        let mut out = String::new();
        out.push_str("Simulation rules\n");
        out.push_str("================\n");
        out.push_str("Phases: IDLE -> create_story -> STORY_CREATED -> start_scene -> IN_SCENE -> start_round -> IN_ROUND; end_round returns to IN_SCENE, end_scene to STORY_CREATED, finalize_gest to IDLE.\n");
        out.push_str("Actors are created (create_actor) and moved between regions (move_actors) only in STORY_CREATED.\n");
        out.push_str("Chains: start_chain(actor, poi) -> continue_chain(actor, action)... -> end_chain(actor). Only end_chain commits; abort_chain discards everything.\n");
        out.push_str("Each continue_chain action must be one of the POI's valid next actions; a chain may only end on a terminal action.\n");
        out.push_str("Actors must be standing to start a chain, unless they resume at the POI they are seated at.\n");
        out.push_str("Held objects can only be put down in the region they were picked up in.\n");
        out.push_str("Spawnables (");
        out.push_str(
            &self
                .spawnables
                .iter()
                .map(|s| format!("{}: {}", s.name, s.sequence.join(" -> ")))
                .collect::<Vec<_>>()
                .join("; "),
        );
        out.push_str(") are atomic: once taken out, the actor is locked until the stash action.\n");
        out.push_str("Exclusive POIs hold one actor at a time.\n");
        out.push_str("Interactions need two distinct standing actors in the same region, without open chains or spawnables; two interactions in a row need a chain in between.\n");
        out.push_str("Transfer interactions (");
        out.push_str(
            &self
                .interactions
                .iter()
                .filter(|i| i.requires_transfer)
                .map(|i| i.name.as_str())
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str(") need the object instance the giver holds; the receiver gets a synchronized INV- event.\n");
        out.push_str("Temporal relations that would create a cycle are rejected.\n");
        out.push_str("\nError codes\n-----------\n");
        for code in ErrorCode::ALL {
            out.push_str(code.as_str());
            out.push_str(": ");
            out.push_str(code.explanation());
            out.push('\n');
        }
        out
    }
}

fn validate_automaton(
    auto: &ChainAutomaton,
    actions: &HashSet<&str>,
    base: &str,
) -> Result<(), RegistryError> {
    if auto.first_actions.is_empty() {
        return Err(RegistryError::reference(
            format!("{base}.first"),
            "automaton has no first action",
        ));
    }
    let check = |path: String, a: &str| {
        if actions.contains(a) {
            Ok(())
        } else {
            Err(RegistryError::reference(path, format!("unknown action '{a}'")))
        }
    };
    for (i, a) in auto.first_actions.iter().enumerate() {
        check(format!("{base}.first[{i}]"), a)?;
    }
    for (k, vs) in &auto.next {
        check(format!("{base}.next.{k}"), k)?;
        for (i, v) in vs.iter().enumerate() {
            check(format!("{base}.next.{k}[{i}]"), v)?;
        }
    }
    for a in &auto.terminal {
        check(format!("{base}.terminal"), a)?;
    }

    // Every action reachable from the start must be able to reach a terminal.
    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut queue: VecDeque<&str> = auto.first_actions.iter().map(String::as_str).collect();
    while let Some(a) = queue.pop_front() {
        if reachable.insert(a) {
            queue.extend(auto.successors(a).iter().map(String::as_str));
        }
    }
    let mut can_finish: BTreeSet<&str> = auto.terminal.iter().map(String::as_str).collect();
    loop {
        let before = can_finish.len();
        for a in &reachable {
            if auto.successors(a).iter().any(|s| can_finish.contains(s.as_str())) {
                can_finish.insert(a);
            }
        }
        if can_finish.len() == before {
            break;
        }
    }
    if let Some(stuck) = reachable.iter().find(|a| !can_finish.contains(*a)) {
        return Err(RegistryError::reference(
            format!("{base}.next.{stuck}"),
            format!("action '{stuck}' cannot reach a terminal action"),
        ));
    }
    Ok(())
}

fn paginate<T: Clone>(items: &[T], page: usize, page_size: usize) -> Result<Page<T>, QueryError> {
    let total = items.len();
    let err = QueryError::Pagination {
        page,
        page_size,
        total,
    };
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(err);
    }
    let start = page.checked_mul(page_size).ok_or_else(|| err.clone())?;
    if start >= total && page != 0 {
        return Err(err);
    }
    let end = (start + page_size).min(total);
    Ok(Page {
        items: items[start.min(total)..end].to_vec(),
        page,
        page_size,
        total,
    })
}
