//! Actor-level simulation rules. The session backend applies them while an
//! agent builds a story; the validator replays them over a finished graph.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCode;
use crate::registry::{CapabilityRegistry, Gender, InteractionType, Poi, Posture};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub instance_id: String,
    pub object_type: String,
    pub origin_region_id: String,
}

/// `<chain_id>#<k>`, k counting acquisitions inside the chain from 1.
pub fn instance_id(chain_id: &str, k: u32) -> String {
    format!("{chain_id}#{k}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LastUnit {
    None,
    Chain,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorState {
    pub actor_id: String,
    pub name: String,
    pub gender: Gender,
    pub skin_id: String,
    pub region_id: String,
    pub posture: Posture,
    pub held: Vec<ObjectInstance>,
    pub locked: bool,
    pub seated_poi: Option<String>,
    /// Last action performed at `seated_poi`; a resumed chain continues from it.
    pub seated_action: Option<String>,
    pub last_unit: LastUnit,
}

impl ActorState {
    pub fn new(
        actor_id: impl Into<String>,
        name: impl Into<String>,
        gender: Gender,
        skin_id: impl Into<String>,
        region_id: impl Into<String>,
    ) -> Self {
        ActorState {
            actor_id: actor_id.into(),
            name: name.into(),
            gender,
            skin_id: skin_id.into(),
            region_id: region_id.into(),
            posture: Posture::Standing,
            held: Vec::new(),
            locked: false,
            seated_poi: None,
            seated_action: None,
            last_unit: LastUnit::None,
        }
    }

    pub fn holds(&self, instance_id: &str) -> bool {
        self.held.iter().any(|h| h.instance_id == instance_id)
    }

    pub fn spawnable_held<'r>(&self, reg: &'r CapabilityRegistry) -> Option<&'r str> {
        self.held
            .iter()
            .find_map(|h| reg.spawnable(&h.object_type).map(|s| s.name.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpawnLock {
    pub spawnable: String,
    /// Index into the spawnable's sequence of the next required action.
    pub next: usize,
}

/// Automaton position and bookkeeping of one chain being played.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainProgress {
    pub chain_id: String,
    pub poi_id: String,
    /// Last accepted action; `None` before the first one.
    pub cursor: Option<String>,
    pub resumed: bool,
    pub lock: Option<SpawnLock>,
    pub acquisitions: u32,
    pub steps: u32,
}

impl ChainProgress {
    /// Starts a chain for `actor` at `poi`, resuming if the actor is seated there.
    pub fn start(chain_id: impl Into<String>, poi: &Poi, actor: &ActorState) -> Self {
        let resumed = actor.seated_poi.as_deref() == Some(poi.id.as_str());
        ChainProgress {
            chain_id: chain_id.into(),
            poi_id: poi.id.clone(),
            cursor: if resumed {
                actor.seated_action.clone()
            } else {
                None
            },
            resumed,
            lock: None,
            acquisitions: 0,
            steps: 0,
        }
    }

    pub fn valid_next(&self, poi: &Poi) -> Vec<String> {
        match &self.cursor {
            None => poi.automaton.first_actions.clone(),
            Some(a) => poi.automaton.successors(a).to_vec(),
        }
    }

    /// True when the chain sits on a terminal action and no spawnable
    /// sequence is pending.
    pub fn may_end(&self, poi: &Poi) -> bool {
        self.steps > 0
            && self.lock.is_none()
            && self
                .cursor
                .as_deref()
                .is_some_and(|c| poi.automaton.is_terminal(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepViolation {
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("actor is locked in the {spawnable} sequence; the next action must be '{expected}'")]
    Locked { spawnable: String, expected: String },
    #[error("'{action}' is not a valid next action here")]
    InvalidNext { action: String, valid: Vec<String> },
    #[error("'{action}' requires the actor to be {required}, but they are {actual}")]
    Posture {
        action: String,
        required: &'static str,
        actual: &'static str,
    },
    #[error("'{action}' puts down an object, but the actor holds nothing to put down")]
    NothingToRelease { action: String },
    #[error("'{instance}' can only be put down in its origin region '{origin}', not in '{region}'")]
    ReleaseOutsideOrigin {
        instance: String,
        origin: String,
        region: String,
    },
}

impl StepViolation {
    pub fn code(&self) -> ErrorCode {
        match self {
            StepViolation::UnknownAction(_) => ErrorCode::InvalidNext,
            StepViolation::Locked { .. } => ErrorCode::Locked,
            StepViolation::InvalidNext { .. } | StepViolation::Posture { .. } => {
                ErrorCode::InvalidNext
            }
            StepViolation::NothingToRelease { .. } | StepViolation::ReleaseOutsideOrigin { .. } => {
                ErrorCode::Lifecycle
            }
        }
    }
}

/// Object movement caused by one chain step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepEffect {
    pub acquired: Option<ObjectInstance>,
    pub released: Option<ObjectInstance>,
}

impl StepEffect {
    /// Object ids the resulting event refers to.
    pub fn entities(&self) -> Vec<String> {
        self.acquired
            .iter()
            .chain(self.released.iter())
            .map(|o| o.instance_id.clone())
            .collect()
    }
}

/// Applies one chain action. On error neither `progress` nor `actor` changes.
pub fn apply_chain_action(
    reg: &CapabilityRegistry,
    poi: &Poi,
    progress: &mut ChainProgress,
    actor: &mut ActorState,
    action: &str,
) -> Result<StepEffect, StepViolation> {
    let spec = reg
        .action(action)
        .ok_or_else(|| StepViolation::UnknownAction(action.to_string()))?;

    if let Some(lock) = &progress.lock {
        let seq = &reg
            .spawnable(&lock.spawnable)
            .expect("locks only reference registered spawnables")
            .sequence;
        if seq[lock.next] != action {
            return Err(StepViolation::Locked {
                spawnable: lock.spawnable.clone(),
                expected: seq[lock.next].clone(),
            });
        }
    }

    let valid = progress.valid_next(poi);
    if !valid.iter().any(|a| a == action) {
        return Err(StepViolation::InvalidNext {
            action: action.to_string(),
            valid,
        });
    }

    if let Some(required) = spec.posture_pre {
        if required != actor.posture {
            return Err(StepViolation::Posture {
                action: action.to_string(),
                required: required.as_str(),
                actual: actor.posture.as_str(),
            });
        }
    }

    // Which held object a release refers to: the stash action of a spawnable
    // releases that spawnable, anything else the most recently acquired item.
    let stash_of = reg
        .spawnables()
        .iter()
        .find(|s| s.sequence[2] == action)
        .map(|s| s.name.as_str());
    let release_idx = if spec.releases {
        let idx = actor
            .held
            .iter()
            .rposition(|h| stash_of.is_none_or(|t| h.object_type == t))
            .ok_or_else(|| StepViolation::NothingToRelease {
                action: action.to_string(),
            })?;
        let held = &actor.held[idx];
        if held.origin_region_id != poi.region_id {
            return Err(StepViolation::ReleaseOutsideOrigin {
                instance: held.instance_id.clone(),
                origin: held.origin_region_id.clone(),
                region: poi.region_id.clone(),
            });
        }
        Some(idx)
    } else {
        None
    };

    // All checks passed; mutate.
    let mut effect = StepEffect::default();
    if let Some(idx) = release_idx {
        effect.released = Some(actor.held.remove(idx));
    }
    let mut lock = progress.lock.take();
    if let Some(l) = lock.as_mut() {
        l.next += 1;
        if l.next >= 3 {
            lock = None;
        }
    } else if let Some(object_type) = &spec.acquires {
        if reg.spawnable(object_type).is_some() {
            lock = Some(SpawnLock {
                spawnable: object_type.clone(),
                next: 1,
            });
        }
    }
    if let Some(object_type) = &spec.acquires {
        progress.acquisitions += 1;
        let inst = ObjectInstance {
            instance_id: instance_id(&progress.chain_id, progress.acquisitions),
            object_type: object_type.clone(),
            origin_region_id: poi.region_id.clone(),
        };
        actor.held.push(inst.clone());
        effect.acquired = Some(inst);
    }
    progress.lock = lock;
    actor.locked = progress.lock.is_some();

    if let Some(post) = spec.posture_post {
        actor.posture = post;
    }
    if actor.posture == Posture::Standing {
        actor.seated_poi = None;
        actor.seated_action = None;
    } else {
        actor.seated_poi = Some(poi.id.clone());
        actor.seated_action = Some(action.to_string());
    }
    progress.cursor = Some(action.to_string());
    progress.steps += 1;
    Ok(effect)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InteractionViolation {
    #[error("an actor cannot interact with themselves")]
    SameActor,
    #[error("{0} must be standing")]
    NotStanding(String),
    #[error("{0} and {1} are in different regions")]
    DifferentRegions(String, String),
    #[error("{0} is in the middle of a spawnable sequence")]
    Locked(String),
    #[error("{0} is holding a {1}")]
    HoldsSpawnable(String, String),
    #[error("{0} and {1} both come straight from an interaction; one of them needs a chain first")]
    Consecutive(String, String),
    #[error("{0} requires the instance being handed over")]
    MissingTransfer(String),
    #[error("{0} does not take an object")]
    UnexpectedTransfer(String),
    #[error("{actor} does not hold '{instance}'")]
    NotHolding { actor: String, instance: String },
}

impl InteractionViolation {
    pub fn code(&self) -> ErrorCode {
        match self {
            InteractionViolation::NotHolding { .. } => ErrorCode::Lifecycle,
            _ => ErrorCode::Interaction,
        }
    }
}

/// Checks the two-actor interaction preconditions (everything except open
/// chains, which only exist inside a session).
pub fn check_interaction(
    reg: &CapabilityRegistry,
    giver: &ActorState,
    receiver: &ActorState,
    itype: &InteractionType,
    transfer: Option<&str>,
) -> Result<(), InteractionViolation> {
    if giver.actor_id == receiver.actor_id {
        return Err(InteractionViolation::SameActor);
    }
    for a in [giver, receiver] {
        if a.posture != Posture::Standing {
            return Err(InteractionViolation::NotStanding(a.actor_id.clone()));
        }
    }
    if giver.region_id != receiver.region_id {
        return Err(InteractionViolation::DifferentRegions(
            giver.actor_id.clone(),
            receiver.actor_id.clone(),
        ));
    }
    for a in [giver, receiver] {
        if a.locked {
            return Err(InteractionViolation::Locked(a.actor_id.clone()));
        }
        if let Some(t) = a.spawnable_held(reg) {
            return Err(InteractionViolation::HoldsSpawnable(
                a.actor_id.clone(),
                t.to_string(),
            ));
        }
    }
    if giver.last_unit == LastUnit::Interaction && receiver.last_unit == LastUnit::Interaction {
        return Err(InteractionViolation::Consecutive(
            giver.actor_id.clone(),
            receiver.actor_id.clone(),
        ));
    }
    match (itype.requires_transfer, transfer) {
        (true, None) => return Err(InteractionViolation::MissingTransfer(itype.name.clone())),
        (false, Some(_)) => return Err(InteractionViolation::UnexpectedTransfer(itype.name.clone())),
        (true, Some(inst)) if !giver.holds(inst) => {
            return Err(InteractionViolation::NotHolding {
                actor: giver.actor_id.clone(),
                instance: inst.to_string(),
            })
        }
        _ => {}
    }
    Ok(())
}

/// Applies a checked interaction: moves the transferred instance (keeping its
/// origin region) and marks both actors.
pub fn apply_interaction(giver: &mut ActorState, receiver: &mut ActorState, transfer: Option<&str>) {
    if let Some(inst) = transfer {
        if let Some(pos) = giver.held.iter().position(|h| h.instance_id == inst) {
            let obj = giver.held.remove(pos);
            receiver.held.push(obj);
        }
    }
    giver.last_unit = LastUnit::Interaction;
    receiver.last_unit = LastUnit::Interaction;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(region: &str) -> (CapabilityRegistry, ActorState) {
        let reg = CapabilityRegistry::sample();
        let actor = ActorState::new("a1", "James", Gender::Male, "m_suit", region);
        (reg, actor)
    }

    fn play(
        reg: &CapabilityRegistry,
        poi: &str,
        actor: &mut ActorState,
        actions: &[&str],
    ) -> Result<ChainProgress, StepViolation> {
        let poi = reg.poi(poi).unwrap();
        let mut p = ChainProgress::start("c1", poi, actor);
        for a in actions {
            apply_chain_action(reg, poi, &mut p, actor, a)?;
        }
        Ok(p)
    }

    #[test]
    fn desk_chain_plays_in_order() {
        let (reg, mut actor) = setup("office");
        let p = play(
            &reg,
            "desk",
            &mut actor,
            &["SitDown", "OpenLaptop", "TypeOnKeyboard", "CloseLaptop", "StandUp"],
        )
        .unwrap();
        assert!(p.may_end(reg.poi("desk").unwrap()));
        assert_eq!(actor.posture, Posture::Standing);
        assert_eq!(actor.seated_poi, None);
    }

    #[test]
    fn skipping_open_laptop_is_invalid() {
        let (reg, mut actor) = setup("office");
        let err = play(&reg, "desk", &mut actor, &["SitDown", "TypeOnKeyboard"]).unwrap_err();
        assert_eq!(err.code(), ErrorCode::InvalidNext);
        match err {
            StepViolation::InvalidNext { valid, .. } => assert_eq!(valid, ["OpenLaptop", "StandUp"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn failed_step_leaves_state_untouched() {
        let (reg, mut actor) = setup("office");
        let poi = reg.poi("desk").unwrap();
        let mut p = ChainProgress::start("c1", poi, &actor);
        apply_chain_action(&reg, poi, &mut p, &mut actor, "SitDown").unwrap();
        let (p0, a0) = (p.clone(), actor.clone());
        assert!(apply_chain_action(&reg, poi, &mut p, &mut actor, "Fly").is_err());
        assert!(apply_chain_action(&reg, poi, &mut p, &mut actor, "CloseLaptop").is_err());
        assert_eq!((p, actor), (p0, a0));
    }

    #[test]
    fn seated_actor_resumes_from_last_action() {
        let (reg, mut actor) = setup("office");
        play(&reg, "desk", &mut actor, &["SitDown", "OpenLaptop", "TypeOnKeyboard", "CloseLaptop"]).unwrap();
        assert_eq!(actor.seated_poi.as_deref(), Some("desk"));
        let p = ChainProgress::start("c2", reg.poi("desk").unwrap(), &actor);
        assert!(p.resumed);
        assert_eq!(p.valid_next(reg.poi("desk").unwrap()), ["OpenLaptop", "StandUp"]);
    }

    #[test]
    fn spawnable_sequence_locks_until_stash() {
        let (reg, mut actor) = setup("bar");
        let poi = reg.poi("bar_stool").unwrap();
        let mut p = ChainProgress::start("c1", poi, &actor);
        for a in ["SitDown", "TakeOutPhone"] {
            apply_chain_action(&reg, poi, &mut p, &mut actor, a).unwrap();
        }
        assert!(actor.locked);
        assert!(!p.may_end(poi));
        let err = apply_chain_action(&reg, poi, &mut p, &mut actor, "StandUp").unwrap_err();
        assert_eq!(err.code(), ErrorCode::Locked);
        for a in ["TalkPhone", "StashPhone"] {
            apply_chain_action(&reg, poi, &mut p, &mut actor, a).unwrap();
        }
        assert!(!actor.locked);
        assert!(actor.held.is_empty());
        assert!(p.may_end(poi));
    }

    #[test]
    fn put_down_rules() {
        let (reg, mut actor) = setup("bar");
        let err = play(&reg, "bar_counter", &mut actor, &["PutDownDrink"]).unwrap_err();
        assert!(matches!(err, StepViolation::NothingToRelease { .. }));

        let (reg, mut actor) = setup("kitchen");
        play(&reg, "kitchen_counter", &mut actor, &["PickUpDrink"]).unwrap();
        assert_eq!(actor.held[0].instance_id, "c1#1");
        actor.region_id = "bar".into();
        let err = play(&reg, "bar_counter", &mut actor, &["PutDownDrink"]).unwrap_err();
        assert!(matches!(err, StepViolation::ReleaseOutsideOrigin { .. }));
        assert_eq!(err.code(), ErrorCode::Lifecycle);
    }

    #[test]
    fn interaction_preconditions() {
        let reg = CapabilityRegistry::sample();
        let hug = reg.interaction("Hug").unwrap();
        let give = reg.interaction("Give").unwrap();
        let mut a = ActorState::new("a1", "A", Gender::Male, "m_suit", "kitchen");
        let mut b = ActorState::new("a2", "B", Gender::Female, "f_casual", "kitchen");
        check_interaction(&reg, &a, &b, hug, None).unwrap();
        assert_eq!(check_interaction(&reg, &a, &a, hug, None), Err(InteractionViolation::SameActor));
        assert!(matches!(
            check_interaction(&reg, &a, &b, give, None),
            Err(InteractionViolation::MissingTransfer(_))
        ));
        assert_eq!(
            check_interaction(&reg, &a, &b, give, Some("c1#1")).unwrap_err().code(),
            ErrorCode::Lifecycle
        );
        apply_interaction(&mut a, &mut b, None);
        assert!(matches!(
            check_interaction(&reg, &a, &b, hug, None),
            Err(InteractionViolation::Consecutive(..))
        ));
        b.posture = Posture::Sitting;
        a.last_unit = LastUnit::Chain;
        assert!(matches!(
            check_interaction(&reg, &a, &b, hug, None),
            Err(InteractionViolation::NotStanding(_))
        ));
    }
}
