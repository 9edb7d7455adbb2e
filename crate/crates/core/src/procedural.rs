//! Procedural story generator. It builds stories exclusively through the
//! session's tool methods, making random choices and retrying with another
//! choice whenever a call is rejected.
//!
//! Randomness comes from SplitMix64 (Steele, Lea & Flood) seeded with the
//! config seed:
//!
//! ```text
//! state = state + 0x9e3779b97f4a7c15
//! z = (state ^ (state >> 30)) * 0xbf58476d1ce4e5b9
//! z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//! out = z ^ (z >> 31)                      (all arithmetic mod 2^64)
//! ```
//!
//! A uniform index below `n` is `(out * n) >> 64` computed in 128 bits, and a
//! Bernoulli draw with probability `p` compares `(out >> 11) / 2^53` with `p`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::ops::RangeInclusive;
use std::sync::Arc;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorCode;
use crate::gest::GestGraph;
use crate::registry::{CapabilityRegistry, Gender, Posture};
use crate::session::Session;

const MALE_NAMES: [&str; 8] = ["James", "Marcus", "Daniel", "Leo", "Victor", "Oscar", "Henry", "Felix"];
const FEMALE_NAMES: [&str; 8] = ["Anna", "Maria", "Clara", "Sofia", "Elena", "Nora", "Ruth", "Iris"];

/// Attempts per actor turn before the turn is skipped.
const TURN_ATTEMPTS: usize = 4;
/// Extra steps a chain may take past its target length to reach a terminal action.
const CHAIN_SLACK: u32 = 6;
const PARTICIPATION: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_actors: u32,
    pub n_scenes: u32,
    pub rounds_per_scene: u32,
    pub chain_len: RangeInclusive<u32>,
    pub interaction_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_actors: 2,
            n_scenes: 2,
            rounds_per_scene: 2,
            chain_len: 1..=4,
            interaction_prob: 0.3,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig {
            seed,
            ..GenConfig::default()
        }
    }

    pub fn check(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if !(1..=8).contains(&self.n_actors) {
            return bad(format!("n_actors must be in 1..=8, got {}", self.n_actors));
        }
        if !(1..=6).contains(&self.n_scenes) {
            return bad(format!("n_scenes must be in 1..=6, got {}", self.n_scenes));
        }
        if !(1..=5).contains(&self.rounds_per_scene) {
            return bad(format!("rounds_per_scene must be in 1..=5, got {}", self.rounds_per_scene));
        }
        if *self.chain_len.start() < 1 || self.chain_len.is_empty() {
            return bad(format!("chain_len must be a non-empty range starting at 1 or more, got {:?}", self.chain_len));
        }
        if !(0.0..=1.0).contains(&self.interaction_prob) {
            return bad(format!("interaction_prob must be in [0, 1], got {}", self.interaction_prob));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("generation exhausted: {0}")]
    GenerationExhausted(String),
}

/// SplitMix64 with the derived draws documented at module level.
#[derive(Debug, Clone)]
pub struct StoryRng(SplitMix64);

impl StoryRng {
    pub fn new(seed: u64) -> Self {
        StoryRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((u128::from(self.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64) < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// Removes and returns a uniformly chosen element.
    pub fn take<T>(&mut self, items: &mut Vec<T>) -> T {
        let i = self.below(items.len());
        items.remove(i)
    }
}

struct Generator<'c> {
    cfg: &'c GenConfig,
    rng: StoryRng,
    session: Session,
    reg: Arc<CapabilityRegistry>,
}

pub fn generate(cfg: &GenConfig, reg: Arc<CapabilityRegistry>) -> Result<GestGraph, GenError> {
    cfg.check()?;
    if reg.episodes().is_empty() || reg.skins().is_empty() {
        return Err(GenError::GenerationExhausted("the registry has no episodes or skins".into()));
    }
    let mut gen = Generator {
        cfg,
        rng: StoryRng::new(cfg.seed),
        session: Session::new(Arc::clone(&reg)),
        reg,
    };
    gen.run()
}

impl Generator<'_> {
    fn exhausted(e: impl std::fmt::Display) -> GenError {
        GenError::GenerationExhausted(e.to_string())
    }

    fn run(&mut self) -> Result<GestGraph, GenError> {
        self.session
            .create_story(&format!("Procedural story {}", self.cfg.seed), None)
            .map_err(Self::exhausted)?;

        let reg = Arc::clone(&self.reg);
        let mut scenes = Vec::new();
        for _ in 0..self.cfg.n_scenes {
            let ep = self.rng.pick(reg.episodes());
            let region = self.rng.pick(&ep.region_ids);
            scenes.push((ep.id.clone(), region.clone()));
        }

        let actors = self.cast(&scenes[0].1)?;
        for (i, (episode, region)) in scenes.iter().enumerate() {
            self.scene(i, episode, region, &actors)?;
        }
        self.session.finalize_gest().map_err(|e| {
            if e.code == ErrorCode::EmptyStory {
                Self::exhausted("no event could be committed")
            } else {
                Self::exhausted(e)
            }
        })
    }

    fn cast(&mut self, region: &str) -> Result<Vec<String>, GenError> {
        let reg = Arc::clone(&self.reg);
        let mut used_skins = BTreeSet::new();
        let mut used_names = BTreeSet::new();
        let mut ids = Vec::new();
        for i in 0..self.cfg.n_actors {
            let first = if self.rng.chance(0.5) { Gender::Male } else { Gender::Female };
            let second = if first == Gender::Male { Gender::Female } else { Gender::Male };
            let mut chosen = None;
            for gender in [first, second] {
                let free: Vec<&str> = reg
                    .skins()
                    .iter()
                    .filter(|s| s.gender == gender && !used_skins.contains(s.id.as_str()))
                    .map(|s| s.id.as_str())
                    .collect();
                if !free.is_empty() {
                    chosen = Some((gender, *self.rng.pick(&free)));
                    break;
                }
            }
            let Some((gender, skin)) = chosen else {
                return Err(Self::exhausted(format!(
                    "{} actors requested but only {} distinct skins exist",
                    self.cfg.n_actors,
                    reg.skins().len()
                )));
            };
            used_skins.insert(skin);
            let pool = if gender == Gender::Male { &MALE_NAMES } else { &FEMALE_NAMES };
            let free: Vec<&str> = pool.iter().copied().filter(|n| !used_names.contains(*n)).collect();
            let name = if free.is_empty() {
                format!("{} {}", pool[0], i + 1)
            } else {
                self.rng.pick(&free).to_string()
            };
            used_names.insert(name.clone());
            let id = self
                .session
                .create_actor(&name, gender, skin, region)
                .map_err(Self::exhausted)?;
            ids.push(id);
        }
        Ok(ids)
    }

    fn has_events(&self, actor: &str) -> bool {
        self.session.graph().events().any(|(_, e)| e.performer == actor)
    }

    fn scene(&mut self, index: usize, episode: &str, region: &str, actors: &[String]) -> Result<(), GenError> {
        // Actors stuck seated elsewhere cannot travel.
        let available: Vec<String> = actors
            .iter()
            .filter(|a| {
                let st = self.session.actor(a).expect("created");
                st.posture == Posture::Standing || st.region_id == region
            })
            .cloned()
            .collect();
        if available.is_empty() {
            return Ok(());
        }
        let mut participants: Vec<String> = available
            .iter()
            .filter(|_| self.rng.chance(PARTICIPATION))
            .cloned()
            .collect();
        if participants.is_empty() {
            participants.push(self.rng.pick(&available).clone());
        }

        let movers: Vec<String> = participants
            .iter()
            .filter(|a| self.session.actor(a).expect("created").region_id != region && self.has_events(a))
            .cloned()
            .collect();
        if !movers.is_empty() {
            self.session.move_actors(&movers, region).map_err(Self::exhausted)?;
        }
        self.session
            .start_scene(episode, region, &participants, &format!("Scene {}", index + 1))
            .map_err(Self::exhausted)?;

        for round in 0..self.cfg.rounds_per_scene {
            self.session.start_round().map_err(Self::exhausted)?;
            let mut order = participants.clone();
            while !order.is_empty() {
                let actor = self.rng.take(&mut order);
                self.turn(&actor, &participants);
            }
            if round + 1 == self.cfg.rounds_per_scene {
                for actor in &participants {
                    self.stand_up(actor);
                }
            }
            self.session.end_round().map_err(Self::exhausted)?;
        }
        self.session.end_scene().map_err(Self::exhausted)?;
        Ok(())
    }

    fn turn(&mut self, actor: &str, participants: &[String]) {
        for _ in 0..TURN_ATTEMPTS {
            let done = if participants.len() > 1 && self.rng.chance(self.cfg.interaction_prob) {
                self.try_interaction(actor, participants)
            } else {
                self.try_chain(actor)
            };
            if done {
                return;
            }
        }
    }

    fn try_interaction(&mut self, actor: &str, participants: &[String]) -> bool {
        let others: Vec<&String> = participants.iter().filter(|p| *p != actor).collect();
        let other = self.rng.pick(&others).to_string();
        let reg = Arc::clone(&self.reg);
        let itype = self.rng.pick(reg.interactions());
        let transfer = if itype.requires_transfer {
            let held: Vec<String> = self
                .session
                .actor(actor)
                .expect("created")
                .held
                .iter()
                .filter(|h| reg.spawnable(&h.object_type).is_none())
                .map(|h| h.instance_id.clone())
                .collect();
            if held.is_empty() {
                return false;
            }
            Some(self.rng.pick(&held).clone())
        } else {
            None
        };
        self.session
            .do_interaction(actor, &other, &itype.name, transfer.as_deref())
            .is_ok()
    }

    fn try_chain(&mut self, actor: &str) -> bool {
        let reg = Arc::clone(&self.reg);
        let state = self.session.actor(actor).expect("created");
        let poi = match &state.seated_poi {
            Some(p) => p.clone(),
            None => {
                let Some(region) = reg.region(&state.region_id) else { return false };
                if region.poi_ids.is_empty() {
                    return false;
                }
                self.rng.pick(&region.poi_ids).clone()
            }
        };
        let Ok(mut options) = self.session.start_chain(actor, &poi) else {
            return false;
        };
        let lo = *self.cfg.chain_len.start();
        let hi = *self.cfg.chain_len.end();
        let target = lo + self.rng.below((hi - lo + 1) as usize) as u32;
        let mut may_end = false;
        let mut steps = 0;
        while steps < target + CHAIN_SLACK {
            if steps >= target && may_end {
                break;
            }
            let mut candidates = options.clone();
            let mut advanced = false;
            while !candidates.is_empty() {
                let action = self.rng.take(&mut candidates);
                if let Ok(step) = self.session.continue_chain(actor, &action) {
                    options = step.valid_next;
                    may_end = step.may_end;
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
            steps += 1;
        }
        if may_end && self.session.end_chain(actor).is_ok() {
            return true;
        }
        self.session.abort_chain(actor).expect("chain is open");
        false
    }

    /// Brings a seated or lying actor back to standing with the shortest
    /// action path their POI's automaton allows.
    fn stand_up(&mut self, actor: &str) {
        let state = self.session.actor(actor).expect("created");
        if state.posture == Posture::Standing {
            return;
        }
        let Some(poi_id) = state.seated_poi.clone() else { return };
        let reg = Arc::clone(&self.reg);
        let poi = reg.poi(&poi_id).expect("seated at a known POI");
        let Ok(options) = self.session.start_chain(actor, &poi_id) else {
            return;
        };
        let stands = |a: &str| reg.action(a).and_then(|s| s.posture_post) == Some(Posture::Standing);
        let mut prev: HashMap<&str, Option<&str>> = HashMap::new();
        let mut queue = VecDeque::new();
        for o in &options {
            prev.entry(o.as_str()).or_insert(None);
            queue.push_back(o.as_str());
        }
        let mut goal = None;
        while let Some(a) = queue.pop_front() {
            if stands(a) {
                goal = Some(a);
                break;
            }
            for n in poi.automaton.successors(a) {
                if !prev.contains_key(n.as_str()) {
                    prev.insert(n, Some(a));
                    queue.push_back(n);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = goal;
        while let Some(a) = cur {
            path.push(a.to_string());
            cur = prev[a];
        }
        path.reverse();
        let ok = !path.is_empty()
            && path.iter().all(|a| self.session.continue_chain(actor, a).is_ok())
            && self.session.end_chain(actor).is_ok();
        if !ok {
            self.session.abort_chain(actor).expect("chain is open");
        }
    }
}
