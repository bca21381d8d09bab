//! Bounded breadth-first exploration of configuration state spaces.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::ident::Role;
use crate::semantics::{config_steps, Configuration, StepMode, TransitionLabel};

/// Exploration bounds: `fuel` caps unfoldings per recursion binder along a
/// path of the *global* LTS; `queue_bound` caps per-pair queue lengths in
/// configurations. Exceeding a bound marks a truncation frontier, never an
/// error.
#[derive(Clone, Copy, Debug)]
pub struct ExploreBounds {
    pub fuel: u32,
    pub queue_bound: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds { fuel: 2, queue_bound: 1 }
    }
}

/// The explored fragment of a configuration LTS.
pub struct ConfigGraph {
    pub states: Vec<Configuration>,
    /// Outgoing edges per state, in the exploration's step mode.
    pub edges: Vec<Vec<(TransitionLabel, usize)>>,
    /// True when some successor of the state was cut off by a bound.
    pub truncated: Vec<bool>,
    /// Labels of the successors cut off at each state (always sends for the
    /// queue bound; anything for the state cap).
    pub cut: Vec<Vec<TransitionLabel>>,
    /// BFS parent pointers for counterexample traces.
    parent: Vec<Option<(usize, TransitionLabel)>>,
    index: HashMap<String, usize>,
}

impl ConfigGraph {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn truncation_frontiers(&self) -> usize {
        self.truncated.iter().filter(|t| **t).count()
    }

    pub fn id_of(&self, c: &Configuration) -> Option<usize> {
        self.index.get(&c.state_key()).copied()
    }

    /// The label sequence from the root to `state`.
    pub fn trace_to(&self, state: usize) -> Vec<TransitionLabel> {
        let mut labels = Vec::new();
        let mut at = state;
        while let Some((prev, label)) = &self.parent[at] {
            labels.push(label.clone());
            at = *prev;
        }
        labels.reverse();
        labels
    }
}

/// Explore breadth-first from `root` under the given step mode. A successor
/// whose queues exceed the bound is not entered; the state it departs from
/// is marked truncated. A global cap on the number of states guards against
/// runaway inputs and is likewise reported as truncation.
pub fn explore_configs(
    root: &Configuration,
    reliable: &BTreeSet<Role>,
    bounds: &ExploreBounds,
    mode: StepMode,
) -> ConfigGraph {
    const MAX_STATES: usize = 1 << 20;
    let mut graph = ConfigGraph {
        states: Vec::new(),
        edges: Vec::new(),
        truncated: Vec::new(),
        cut: Vec::new(),
        parent: Vec::new(),
        index: HashMap::new(),
    };
    let mut queue = VecDeque::new();
    graph.index.insert(root.state_key(), 0);
    graph.states.push(root.clone());
    graph.edges.push(Vec::new());
    graph.truncated.push(false);
    graph.cut.push(Vec::new());
    graph.parent.push(None);
    queue.push_back(0usize);

    while let Some(at) = queue.pop_front() {
        let state = graph.states[at].clone();
        for (label, next) in config_steps(&state, reliable, mode) {
            let exceeds = next.queues.values().any(|q| q.len() > bounds.queue_bound);
            if exceeds {
                graph.truncated[at] = true;
                graph.cut[at].push(label);
                continue;
            }
            let key = next.state_key();
            let id = match graph.index.get(&key) {
                Some(&id) => id,
                None => {
                    if graph.states.len() >= MAX_STATES {
                        graph.truncated[at] = true;
                        graph.cut[at].push(label);
                        continue;
                    }
                    let id = graph.states.len();
                    graph.index.insert(key, id);
                    graph.states.push(next);
                    graph.edges.push(Vec::new());
                    graph.truncated.push(false);
                    graph.cut.push(Vec::new());
                    graph.parent.push(Some((at, label.clone())));
                    queue.push_back(id);
                    id
                }
            };
            graph.edges[at].push((label, id));
        }
    }
    graph
}

/// Re-execute a label sequence from a configuration; used to validate
/// counterexample traces. Returns the reached configuration, or the index
/// of the first label that is not enabled.
pub fn replay(
    root: &Configuration,
    reliable: &BTreeSet<Role>,
    labels: &[TransitionLabel],
) -> Result<Configuration, usize> {
    let mut at = root.clone();
    for (i, label) in labels.iter().enumerate() {
        let step = config_steps(&at, reliable, StepMode::All)
            .into_iter()
            .find(|(l, _)| l == label)
            .ok_or(i)?;
        at = step.1;
    }
    Ok(at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::LocalType;
    use std::collections::BTreeMap;

    fn ping_pong() -> (Configuration, BTreeSet<Role>) {
        let ctx: BTreeMap<Role, LocalType> = [
            (
                Role::new("p"),
                LocalType::rec(
                    "t",
                    LocalType::send(
                        "q",
                        "ping",
                        None,
                        LocalType::recv("q", "pong", None, LocalType::var("t")),
                    ),
                ),
            ),
            (
                Role::new("q"),
                LocalType::rec(
                    "t",
                    LocalType::recv(
                        "p",
                        "ping",
                        None,
                        LocalType::send("p", "pong", None, LocalType::var("t")),
                    ),
                ),
            ),
        ]
        .into_iter()
        .collect();
        let reliable = [Role::new("p"), Role::new("q")].into_iter().collect();
        (Configuration::with_empty_queues(ctx), reliable)
    }

    #[test]
    fn ping_pong_cycles_in_four_states() {
        let (c, reliable) = ping_pong();
        let graph = explore_configs(
            &c,
            &reliable,
            &ExploreBounds { fuel: 2, queue_bound: 1 },
            StepMode::NonCrashOfReliable,
        );
        assert_eq!(graph.state_count(), 4);
        assert_eq!(graph.truncation_frontiers(), 0);
        // Every state has exactly one successor and the loop closes.
        assert!(graph.edges.iter().all(|e| e.len() == 1));
    }

    #[test]
    fn traces_replay() {
        let (c, reliable) = ping_pong();
        let graph = explore_configs(
            &c,
            &reliable,
            &ExploreBounds::default(),
            StepMode::NonCrashOfReliable,
        );
        for id in 0..graph.state_count() {
            let trace = graph.trace_to(id);
            let reached = replay(&c, &reliable, &trace).expect("trace replays");
            assert_eq!(reached.state_key(), graph.states[id].state_key());
        }
    }

    #[test]
    fn queue_bound_truncates() {
        // p sends twice in a row to q.
        let ctx: BTreeMap<Role, LocalType> = [
            (
                Role::new("p"),
                LocalType::send("q", "a", None, LocalType::send("q", "b", None, LocalType::End)),
            ),
            (
                Role::new("q"),
                LocalType::recv("p", "a", None, LocalType::recv("p", "b", None, LocalType::End)),
            ),
        ]
        .into_iter()
        .collect();
        let c = Configuration::with_empty_queues(ctx);
        let reliable: BTreeSet<Role> = [Role::new("p"), Role::new("q")].into_iter().collect();
        let graph = explore_configs(
            &c,
            &reliable,
            &ExploreBounds { fuel: 2, queue_bound: 1 },
            StepMode::NonCrashOfReliable,
        );
        assert!(graph.truncation_frontiers() > 0);
        let unbounded = explore_configs(
            &c,
            &reliable,
            &ExploreBounds { fuel: 2, queue_bound: 8 },
            StepMode::NonCrashOfReliable,
        );
        assert_eq!(unbounded.truncation_frontiers(), 0);
    }
}
