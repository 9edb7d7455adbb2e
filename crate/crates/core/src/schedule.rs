//! Temporal scheduling: temporal edges become difference constraints over
//! integer start times, solved all-pairs with Floyd-Warshall.
//!
//! Encodings, with `s` the start and `d` the duration of an event:
//!
//! | relation          | constraints                                        |
//! |-------------------|----------------------------------------------------|
//! | `before(a, b)`    | `s_a - s_b <= -d_a`                                |
//! | `same_time(a, b)` | `s_a - s_b <= 0`, `s_b - s_a <= 0`                 |
//! | `starts_with`     | same as `same_time`                                |
//! | `concurrent(a,b)` | `s_a - s_b <= d_b - 1`, `s_b - s_a <= d_a - 1`     |
//!
//! `concurrent` is a strict overlap of at least one time unit.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gest::{GestGraph, TemporalRelation};
use crate::registry::CapabilityRegistry;

/// `start[x] - start[y] <= bound`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiffConstraint {
    pub x: usize,
    pub y: usize,
    pub bound: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub events: Vec<String>,
    pub durations: Vec<i64>,
    pub constraints: Vec<DiffConstraint>,
}

impl ConstraintSystem {
    pub fn new(events: Vec<String>, durations: Vec<i64>) -> Self {
        assert_eq!(events.len(), durations.len());
        ConstraintSystem {
            events,
            durations,
            constraints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn add(&mut self, x: usize, y: usize, bound: i64) {
        self.constraints.push(DiffConstraint { x, y, bound });
    }

    pub fn add_relation(&mut self, a: usize, b: usize, rel: TemporalRelation) {
        match rel {
            TemporalRelation::Before => self.add(a, b, -self.durations[a]),
            TemporalRelation::SameTime | TemporalRelation::StartsWith => {
                self.add(a, b, 0);
                self.add(b, a, 0);
            }
            TemporalRelation::Concurrent => {
                self.add(a, b, self.durations[b] - 1);
                self.add(b, a, self.durations[a] - 1);
            }
        }
    }

    pub fn is_satisfied_by(&self, starts: &[i64]) -> bool {
        starts.len() == self.len()
            && self
                .constraints
                .iter()
                .all(|c| starts[c.x] - starts[c.y] <= c.bound)
    }
}

/// Constraint system for every event node of `g`, in node order.
pub fn build_constraints(g: &GestGraph, reg: &CapabilityRegistry) -> ConstraintSystem {
    let mut events = Vec::new();
    let mut durations = Vec::new();
    for (id, ev) in g.events() {
        events.push(id.to_string());
        durations.push(i64::from(reg.duration_of(&ev.action)));
    }
    let index: HashMap<&str, usize> = events
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut cs = ConstraintSystem::new(events.clone(), durations);
    for (edge, rel) in g.temporal_edges() {
        if let (Some(&a), Some(&b)) = (index.get(edge.from.as_str()), index.get(edge.to.as_str())) {
            cs.add_relation(a, b, rel);
        }
    }
    cs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub start: i64,
    pub end: i64,
    /// Half-open frame interval `[frames[0], frames[1])`.
    pub frames: [i64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub fps: u32,
    pub events: BTreeMap<String, ScheduledEvent>,
    pub makespan: i64,
}

impl Schedule {
    pub fn with_fps(mut self, fps: u32) -> Self {
        let fps = fps.max(1);
        self.fps = fps;
        self.events = frame_mapping(&self, fps)
            .into_iter()
            .map(|(id, frames)| {
                let ev = self.events[&id];
                (id, ScheduledEvent { frames, ..ev })
            })
            .collect();
        self
    }

    pub fn total_frames(&self) -> i64 {
        self.makespan * i64::from(self.fps)
    }

    pub fn get(&self, id: &str) -> Option<&ScheduledEvent> {
        self.events.get(id)
    }

    /// Event ids of `g` ordered by start time, then by position in the graph.
    pub fn ordered_events<'g>(&self, g: &'g GestGraph) -> Vec<&'g str> {
        let mut ids: Vec<(i64, usize, &str)> = g
            .events()
            .enumerate()
            .filter_map(|(i, (id, _))| self.events.get(id).map(|s| (s.start, i, id)))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, _, id)| id).collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialization is infallible")
    }
}

/// A negative cycle in the constraint graph; `cycle` lists the event ids on it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("temporal constraints are infeasible (cycle: {})", cycle.join(" -> "))]
pub struct Infeasible {
    pub cycle: Vec<String>,
}

const INF: i64 = i64::MAX / 4;

/// Earliest-start solution of `cs`.
///
/// Writing `y = -start`, each constraint `s_x - s_y <= c` becomes an arc
/// `x -> y` of weight `c`, and a virtual source reaches every event with
/// weight 0 (so `start >= 0`). Shortest distances from the source are the
/// largest feasible `y`, i.e. the componentwise smallest starts.
pub fn solve(cs: &ConstraintSystem) -> Result<Schedule, Infeasible> {
    let n = cs.len();
    let size = n + 1;
    let source = n;
    let mut dist = vec![INF; size * size];
    let mut next = vec![usize::MAX; size * size];
    for i in 0..size {
        dist[i * size + i] = 0;
        next[i * size + i] = i;
    }
    for c in &cs.constraints {
        let cell = c.x * size + c.y;
        if c.bound < dist[cell] {
            dist[cell] = c.bound;
            next[cell] = c.y;
        }
    }
    for v in 0..n {
        let cell = source * size + v;
        if 0 < dist[cell] {
            dist[cell] = 0;
            next[cell] = v;
        }
    }

    for k in 0..size {
        for i in 0..size {
            let dik = dist[i * size + k];
            if dik >= INF {
                continue;
            }
            for j in 0..size {
                let dkj = dist[k * size + j];
                if dkj >= INF {
                    continue;
                }
                let through = dik + dkj;
                if through < dist[i * size + j] {
                    dist[i * size + j] = through;
                    next[i * size + j] = next[i * size + k];
                }
            }
            if dist[i * size + i] < 0 {
                return Err(Infeasible {
                    cycle: witness_cycle(&next, size, i, cs),
                });
            }
        }
    }

    let mut events = BTreeMap::new();
    let mut makespan = 0;
    for v in 0..n {
        let start = -dist[source * size + v];
        let end = start + cs.durations[v];
        makespan = makespan.max(end);
        events.insert(
            cs.events[v].clone(),
            ScheduledEvent {
                start,
                end,
                frames: [start, end],
            },
        );
    }
    Ok(Schedule {
        fps: 1,
        events,
        makespan,
    })
}

fn witness_cycle(next: &[usize], size: usize, start: usize, cs: &ConstraintSystem) -> Vec<String> {
    let mut path = vec![start];
    let mut cur = start;
    for _ in 0..size {
        let step = next[cur * size + start];
        if step == usize::MAX || step == start {
            break;
        }
        if let Some(pos) = path.iter().position(|&p| p == step) {
            path.drain(..pos);
            break;
        }
        path.push(step);
        cur = step;
    }
    path.into_iter()
        .filter(|&v| v < cs.len())
        .map(|v| cs.events[v].clone())
        .collect()
}

/// `[start * fps, end * fps)` for every event.
pub fn frame_mapping(s: &Schedule, fps: u32) -> BTreeMap<String, [i64; 2]> {
    let fps = i64::from(fps.max(1));
    s.events
        .iter()
        .map(|(id, ev)| (id.clone(), [ev.start * fps, ev.end * fps]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(durations: &[i64]) -> ConstraintSystem {
        ConstraintSystem::new(
            (0..durations.len()).map(|i| format!("e{i}")).collect(),
            durations.to_vec(),
        )
    }

    fn starts(s: &Schedule, n: usize) -> Vec<i64> {
        (0..n).map(|i| s.events[&format!("e{i}")].start).collect()
    }

    #[test]
    fn before_encoding() {
        let mut cs = system(&[2, 1]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        assert_eq!(cs.constraints, vec![DiffConstraint { x: 0, y: 1, bound: -2 }]);
    }

    #[test]
    fn same_time_encoding() {
        let mut cs = system(&[2, 1]);
        cs.add_relation(0, 1, TemporalRelation::SameTime);
        assert_eq!(
            cs.constraints,
            vec![
                DiffConstraint { x: 0, y: 1, bound: 0 },
                DiffConstraint { x: 1, y: 0, bound: 0 }
            ]
        );
    }

    #[test]
    fn concurrent_encoding_is_strict_overlap() {
        let mut cs = system(&[2, 3]);
        cs.add_relation(0, 1, TemporalRelation::Concurrent);
        assert!(cs.is_satisfied_by(&[0, 1]));
        assert!(cs.is_satisfied_by(&[2, 0]));
        assert!(!cs.is_satisfied_by(&[3, 0]));
        assert!(!cs.is_satisfied_by(&[0, 2]));
    }

    #[test]
    fn three_chain() {
        let mut cs = system(&[1, 1, 1]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        cs.add_relation(1, 2, TemporalRelation::Before);
        let s = solve(&cs).unwrap();
        assert_eq!(starts(&s, 3), [0, 1, 2]);
        assert_eq!(s.makespan, 3);
    }

    #[test]
    fn unconstrained_events_start_at_zero() {
        let mut cs = system(&[1, 1, 4]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        let s = solve(&cs).unwrap();
        assert_eq!(starts(&s, 3), [0, 1, 0]);
        assert_eq!(s.makespan, 4);
    }

    #[test]
    fn same_time_with_before_is_infeasible() {
        let mut cs = system(&[1, 1]);
        cs.add_relation(0, 1, TemporalRelation::SameTime);
        cs.add_relation(0, 1, TemporalRelation::Before);
        let err = solve(&cs).unwrap_err();
        assert!(!err.cycle.is_empty());
        assert!(err.cycle.iter().all(|id| id == "e0" || id == "e1"));
    }

    #[test]
    fn before_cycle_witness_names_the_cycle() {
        let mut cs = system(&[1, 1, 1, 1]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        cs.add_relation(1, 2, TemporalRelation::Before);
        cs.add_relation(2, 0, TemporalRelation::Before);
        let mut cycle = solve(&cs).unwrap_err().cycle;
        cycle.sort();
        assert_eq!(cycle, ["e0", "e1", "e2"]);
    }

    #[test]
    fn frames_scale_with_fps() {
        let mut cs = system(&[1, 1, 1]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        cs.add_relation(1, 2, TemporalRelation::Before);
        let s = solve(&cs).unwrap();
        let map = frame_mapping(&s, 5);
        assert_eq!(map["e2"], [10, 15]);
        assert_eq!(frame_mapping(&s, 1)["e2"], [2, 3]);
        let s5 = s.with_fps(5);
        assert_eq!(s5.total_frames(), 15);
        assert_eq!(s5.events["e2"].frames, [10, 15]);
    }

    #[test]
    fn solving_is_deterministic() {
        let mut cs = system(&[2, 1, 3, 1]);
        cs.add_relation(0, 2, TemporalRelation::Before);
        cs.add_relation(1, 2, TemporalRelation::Concurrent);
        cs.add_relation(3, 1, TemporalRelation::StartsWith);
        assert_eq!(solve(&cs).unwrap(), solve(&cs).unwrap());
    }

    #[test]
    fn schedule_json_shape() {
        let mut cs = system(&[1, 1]);
        cs.add_relation(0, 1, TemporalRelation::Before);
        let s = solve(&cs).unwrap().with_fps(2);
        let v: serde_json::Value = serde_json::from_str(&s.to_json_pretty()).unwrap();
        assert_eq!(v["fps"], 2);
        assert_eq!(v["makespan"], 2);
        assert_eq!(v["events"]["e1"]["start"], 1);
        assert_eq!(v["events"]["e1"]["end"], 2);
        assert_eq!(v["events"]["e1"]["frames"], serde_json::json!([2, 4]));
    }
}
