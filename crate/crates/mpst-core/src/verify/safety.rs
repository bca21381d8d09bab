//! Bounded checking of the configuration safety property.

use std::collections::BTreeSet;

use crate::ident::Role;
use crate::local::LocalType;
use crate::semantics::{explore_configs, Configuration, ExploreBounds, StepMode};
use crate::verify::VerificationReport;

/// Check the two point clauses of safety on every state reachable without
/// crashing reliable roles: a queued message must be receivable (no label
/// mismatch), and a receiver facing a crashed, drained peer must hold a
/// crash handling branch. Recursion is unfolded before checking.
pub fn check_safety(
    root: &Configuration,
    reliable: &BTreeSet<Role>,
    bounds: &ExploreBounds,
) -> VerificationReport {
    const PROPERTY: &str = "safety";
    let graph = explore_configs(root, reliable, bounds, StepMode::NonCrashOfReliable);
    for (id, state) in graph.states.iter().enumerate() {
        if let Some(reason) = state_violation(state) {
            return VerificationReport::violated(
                PROPERTY,
                graph.trace_to(id),
                reason,
                graph.state_count(),
                graph.truncation_frontiers(),
            );
        }
    }
    VerificationReport::holds(PROPERTY, graph.state_count(), graph.truncation_frontiers())
}

/// The first safety clause violated in this state, if any.
pub(crate) fn state_violation(state: &Configuration) -> Option<String> {
    for (q, t) in &state.ctx {
        let t = t.unfold_head();
        let LocalType::External { peer: p, branches } = &t else {
            continue;
        };
        let queue = state.queue(p, q);
        if let Some((label, payload)) = queue.head() {
            let receivable =
                branches.iter().any(|b| &b.label == label && &b.payload == payload);
            if !receivable {
                return Some(format!(
                    "S-in: {q} expects {} from {p} but the queue heads with {label}",
                    t
                ));
            }
        } else if queue.is_empty_available()
            && state.ctx.get(p).map(|t| matches!(t, LocalType::Stop)).unwrap_or(false)
            && !branches.iter().any(|b| b.label.is_crash())
        {
            return Some(format!(
                "S-crash: {q} waits on crashed {p} with no crash handling branch"
            ));
        }
    }
    None
}
