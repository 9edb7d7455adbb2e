//! Episode selection: the smallest-ish set of episodes whose regions cover
//! every region a graph uses, chosen greedily.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::gest::GestGraph;
use crate::registry::CapabilityRegistry;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverError {
    #[error("region '{0}' is not part of any episode")]
    UncoverableRegion(String),
}

/// Greedy set cover over named sets. Each step takes the set covering the most
/// still-uncovered elements; ties go to the lexicographically smallest name.
/// Returns `Err(element)` for the first element no set contains.
pub fn greedy_set_cover<'a>(
    universe: &BTreeSet<&'a str>,
    sets: &[(&'a str, BTreeSet<&'a str>)],
) -> Result<BTreeSet<&'a str>, &'a str> {
    if let Some(missing) = universe
        .iter()
        .find(|e| !sets.iter().any(|(_, s)| s.contains(*e)))
    {
        return Err(missing);
    }
    let mut uncovered = universe.clone();
    let mut chosen = BTreeSet::new();
    while !uncovered.is_empty() {
        let (name, set) = sets
            .iter()
            .filter(|(name, _)| !chosen.contains(name))
            .max_by(|(na, sa), (nb, sb)| {
                let ca = sa.intersection(&uncovered).count();
                let cb = sb.intersection(&uncovered).count();
                ca.cmp(&cb).then_with(|| nb.cmp(na))
            })
            .expect("every element is coverable");
        chosen.insert(*name);
        for e in set {
            uncovered.remove(e);
        }
    }
    Ok(chosen)
}

/// Regions a graph refers to: event locations, scene regions and actors'
/// starting regions.
pub fn referenced_regions(g: &GestGraph) -> BTreeSet<&str> {
    let mut regions: BTreeSet<&str> = g.events().map(|(_, e)| e.location.region.as_str()).collect();
    regions.extend(g.scenes.iter().map(|s| s.region_id.as_str()));
    regions.extend(g.actors().map(|(_, a)| a.start_region.as_str()));
    regions
}

pub fn select_episodes(g: &GestGraph, reg: &CapabilityRegistry) -> Result<BTreeSet<String>, CoverError> {
    let universe = referenced_regions(g);
    let sets: Vec<(&str, BTreeSet<&str>)> = reg
        .episodes()
        .iter()
        .map(|e| (e.id.as_str(), e.region_ids.iter().map(String::as_str).collect()))
        .collect();
    greedy_set_cover(&universe, &sets)
        .map(|chosen| chosen.into_iter().map(str::to_string).collect())
        .map_err(|r| CoverError::UncoverableRegion(r.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(items: &[&'static str]) -> BTreeSet<&'static str> {
        items.iter().copied().collect()
    }

    #[test]
    fn overlapping_episodes_pick_two() {
        // A={r1,r2} and B={r2,r3} tie on the first step; A wins by name.
        // Then B and C tie on {r3}; B wins by name.
        let sets = vec![
            ("A", set(&["r1", "r2"])),
            ("B", set(&["r2", "r3"])),
            ("C", set(&["r3"])),
        ];
        let chosen = greedy_set_cover(&set(&["r1", "r2", "r3"]), &sets).unwrap();
        assert_eq!(chosen, set(&["A", "B"]));
    }

    #[test]
    fn single_episode_suffices() {
        let reg = CapabilityRegistry::sample();
        let mut g = GestGraph::new();
        g.scenes.push(crate::gest::SceneMeta {
            scene_id: "s1".into(),
            episode_id: "ep_house".into(),
            region_id: "office".into(),
            actor_ids: vec![],
            narrative: String::new(),
        });
        let chosen = select_episodes(&g, &reg).unwrap();
        assert_eq!(chosen.into_iter().collect::<Vec<_>>(), ["ep_house"]);
    }

    #[test]
    fn unknown_region_is_uncoverable() {
        let sets = vec![("A", set(&["r1"]))];
        assert_eq!(greedy_set_cover(&set(&["r1", "r9"]), &sets), Err("r9"));
    }

    proptest! {
        #[test]
        fn greedy_result_is_a_cover(
            raw in proptest::collection::vec(proptest::collection::btree_set(0u8..8, 0..5), 1..6),
            want in proptest::collection::btree_set(0u8..8, 0..8),
        ) {
            let names: Vec<String> = (0..raw.len()).map(|i| format!("s{i}")).collect();
            let elems: Vec<String> = (0..8).map(|i| format!("r{i}")).collect();
            let sets: Vec<(&str, BTreeSet<&str>)> = raw
                .iter()
                .enumerate()
                .map(|(i, s)| (names[i].as_str(), s.iter().map(|&e| elems[e as usize].as_str()).collect()))
                .collect();
            let universe: BTreeSet<&str> = want.iter().map(|&e| elems[e as usize].as_str()).collect();
            let coverable = universe.iter().all(|e| sets.iter().any(|(_, s)| s.contains(e)));
            match greedy_set_cover(&universe, &sets) {
                Ok(chosen) => {
                    prop_assert!(coverable);
                    for e in &universe {
                        prop_assert!(sets.iter().any(|(n, s)| chosen.contains(n) && s.contains(e)));
                    }
                }
                Err(_) => prop_assert!(!coverable),
            }
        }
    }
}
