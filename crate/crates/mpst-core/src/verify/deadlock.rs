//! Bounded checking of configuration deadlock-freedom.

use std::collections::BTreeSet;

use crate::ident::Role;
use crate::local::LocalType;
use crate::semantics::{explore_configs, Configuration, ExploreBounds, Queue, StepMode};
use crate::verify::VerificationReport;

/// Every terminal state (no step without crashing reliable roles, and not a
/// truncation frontier) must be stable: all entries `end` or `stop`, all
/// queues empty except those into crashed roles, which are unavailable.
/// Assumes the configuration is safe; run [`super::check_safety`] first.
pub fn check_deadlock_freedom(
    root: &Configuration,
    reliable: &BTreeSet<Role>,
    bounds: &ExploreBounds,
) -> VerificationReport {
    const PROPERTY: &str = "deadlock-freedom";
    let graph = explore_configs(root, reliable, bounds, StepMode::NonCrashOfReliable);
    for (id, state) in graph.states.iter().enumerate() {
        if !graph.edges[id].is_empty() || graph.truncated[id] {
            continue;
        }
        if let Some(reason) = terminal_violation(state) {
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

fn terminal_violation(state: &Configuration) -> Option<String> {
    for (role, t) in &state.ctx {
        if !matches!(t, LocalType::End | LocalType::Stop) {
            return Some(format!("terminal state leaves {role} at {t}"));
        }
    }
    for ((from, to), queue) in &state.queues {
        let crashed = matches!(state.ctx.get(to), Some(LocalType::Stop));
        match queue {
            Queue::Unavailable if !crashed => {
                return Some(format!("queue {from}->{to} is unavailable but {to} has not crashed"))
            }
            Queue::Available { msgs } if crashed => {
                let _ = msgs;
                return Some(format!("queue {from}->{to} should be unavailable: {to} crashed"));
            }
            Queue::Available { msgs } if !msgs.is_empty() => {
                return Some(format!(
                    "terminal state leaves {} undelivered messages in {from}->{to}",
                    msgs.len()
                ))
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::Verdict;
    use std::collections::BTreeMap;

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    #[test]
    fn all_end_is_deadlock_free() {
        let ctx: BTreeMap<Role, LocalType> =
            [(r("p"), LocalType::End), (r("q"), LocalType::End)].into_iter().collect();
        let c = Configuration::with_empty_queues(ctx);
        let reliable = [r("p"), r("q")].into_iter().collect();
        let report = check_deadlock_freedom(&c, &reliable, &ExploreBounds::default());
        assert_eq!(report.verdict, Verdict::Holds);
    }

    #[test]
    fn stuck_external_choice_is_a_deadlock() {
        // q waits on p forever; p is already done.
        let ctx: BTreeMap<Role, LocalType> = [
            (r("p"), LocalType::End),
            (r("q"), LocalType::recv("p", "l", None, LocalType::End)),
        ]
        .into_iter()
        .collect();
        let c = Configuration::with_empty_queues(ctx);
        let reliable = [r("p"), r("q")].into_iter().collect();
        let report = check_deadlock_freedom(&c, &reliable, &ExploreBounds::default());
        assert_eq!(report.verdict, Verdict::Violated);
        assert!(report.counterexample.unwrap().is_empty(), "the root itself is stuck");
    }

    #[test]
    fn infinite_loop_is_deadlock_free() {
        let ctx: BTreeMap<Role, LocalType> = [
            (
                r("p"),
                LocalType::rec("t", LocalType::send("q", "l", None, LocalType::var("t"))),
            ),
            (
                r("q"),
                LocalType::rec("t", LocalType::recv("p", "l", None, LocalType::var("t"))),
            ),
        ]
        .into_iter()
        .collect();
        let c = Configuration::with_empty_queues(ctx);
        let reliable = [r("p"), r("q")].into_iter().collect();
        let report = check_deadlock_freedom(&c, &reliable, &ExploreBounds::default());
        assert_eq!(report.verdict, Verdict::Holds);
    }
}
