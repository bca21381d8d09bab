//! Co-exploration of the global-type and configuration semantics, checking
//! the two directions of their correspondence on every reachable associated
//! pair.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::ident::{RecVar, Role};
use crate::semantics::{
    config_steps, global_steps, AnnotatedGlobal, Configuration, ExploreBounds, StepMode,
    TransitionLabel,
};
use crate::verify::{check_association, VerificationReport};

struct Item {
    global: AnnotatedGlobal,
    config: Configuration,
    fuel_spent: HashMap<RecVar, u32>,
    parent: Option<(usize, TransitionLabel)>,
}

fn trace_to(items: &[Item], mut at: usize) -> Vec<TransitionLabel> {
    let mut labels = Vec::new();
    while let Some((prev, label)) = &items[at].parent {
        labels.push(label.clone());
        at = *prev;
    }
    labels.reverse();
    labels
}

/// Breadth-first co-exploration from an associated pair.
///
/// At every visited pair, completeness demands that each configuration step
/// (crashes of reliable roles excluded) is matched by a global step with the
/// same label whose successors re-associate; soundness demands that a
/// reducible global type has some matching, re-associating configuration
/// step. Successor pairs beyond the fuel or queue bounds become truncation
/// frontiers.
pub fn check_correspondence(
    root: &AnnotatedGlobal,
    reliable: &BTreeSet<Role>,
    bounds: &ExploreBounds,
) -> VerificationReport {
    const PROPERTY: &str = "correspondence";
    let roles: BTreeSet<Role> = root
        .gtype
        .active_roles()
        .union(&root.crashed)
        .cloned()
        .collect();
    let config = match Configuration::projected(&root.gtype, &roles, reliable) {
        Ok(c) => c,
        Err(e) => {
            return VerificationReport::violated(
                PROPERTY,
                Vec::new(),
                format!("initial configuration is not projectable: {e}"),
                0,
                0,
            )
        }
    };
    if let Err(e) = check_association(root, &config, reliable) {
        return VerificationReport::violated(
            PROPERTY,
            Vec::new(),
            format!("initial pair is not associated: {e}"),
            0,
            0,
        );
    }

    let mut items = vec![Item {
        global: root.clone(),
        config,
        fuel_spent: HashMap::new(),
        parent: None,
    }];
    let mut visited: HashSet<(String, String)> = HashSet::new();
    visited.insert((root.state_key(), items[0].config.state_key()));
    let mut frontiers = 0usize;
    let mut queue = VecDeque::new();
    queue.push_back(0usize);

    while let Some(at) = queue.pop_front() {
        let gsteps = global_steps(&items[at].global, reliable);
        let csteps =
            config_steps(&items[at].config, reliable, StepMode::NonCrashOfReliable);

        // Completeness: every configuration move is matched and
        // re-associates.
        for (label, next_config) in &csteps {
            let Some(gstep) = gsteps.iter().find(|s| &s.label == label) else {
                let mut trace = trace_to(&items, at);
                trace.push(label.clone());
                return VerificationReport::violated(
                    PROPERTY,
                    trace,
                    format!(
                        "completeness: configuration step {label} has no matching global step from {}",
                        items[at].global
                    ),
                    items.len(),
                    frontiers,
                );
            };
            if let Err(e) = check_association(&gstep.next, next_config, reliable) {
                let mut trace = trace_to(&items, at);
                trace.push(label.clone());
                return VerificationReport::violated(
                    PROPERTY,
                    trace,
                    format!("completeness: successors of {label} are not associated: {e}"),
                    items.len(),
                    frontiers,
                );
            }
        }

        // Soundness: a reducible global type is matched by some
        // configuration move with re-associating successors. Matching
        // against the completeness-checked pairs suffices.
        if !gsteps.is_empty() {
            let matched = csteps.iter().any(|(label, _)| gsteps.iter().any(|s| &s.label == label));
            if !matched {
                return VerificationReport::violated(
                    PROPERTY,
                    trace_to(&items, at),
                    format!(
                        "soundness: the global type {} can reduce but the configuration cannot follow",
                        items[at].global
                    ),
                    items.len(),
                    frontiers,
                );
            }
        }

        // Advance along the matched labels, within bounds.
        for (label, next_config) in csteps {
            let Some(gstep) = gsteps.iter().find(|s| s.label == label) else {
                continue;
            };
            let mut fuel_spent = items[at].fuel_spent.clone();
            let mut over_fuel = false;
            for var in &gstep.unfolded {
                let spent = fuel_spent.entry(var.clone()).or_insert(0);
                *spent += 1;
                if *spent > bounds.fuel {
                    over_fuel = true;
                }
            }
            let over_queue =
                next_config.queues.values().any(|q| q.len() > bounds.queue_bound);
            if over_fuel || over_queue {
                frontiers += 1;
                continue;
            }
            let key = (gstep.next.state_key(), next_config.state_key());
            if visited.insert(key) {
                items.push(Item {
                    global: gstep.next.clone(),
                    config: next_config,
                    fuel_spent,
                    parent: Some((at, label)),
                });
                queue.push_back(items.len() - 1);
            }
        }
    }

    VerificationReport::holds(PROPERTY, items.len(), frontiers)
}
