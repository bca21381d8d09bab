//! Bounded checking of configuration liveness.
//!
//! Liveness quantifies over fair non-crashing paths from every reachable
//! state: every queued non-crash message is eventually consumed, and every
//! pending external choice eventually receives or detects a crash. On the
//! explored finite graph this is decided by analysing the strongly connected
//! components of the non-crashing edge relation: a violation is an SCC that
//! is fair-closed (every send, receive, and crash detection enabled inside
//! it is also taken inside it) yet starves some obligation, or a terminal
//! path ending with obligations outstanding. The analysis is exact for
//! lasso-shaped paths inside the explored graph. Successors cut off by the
//! queue bound are always sends; fairness constrains sends per peer pair, so
//! a component remains judgeable as long as each cut send's pair is served
//! inside it, and is otherwise skipped and left to the frontier report.

use std::collections::{BTreeSet, HashSet};

use crate::ident::Role;
use crate::local::LocalType;
use crate::semantics::{
    explore_configs, ConfigGraph, Configuration, ExploreBounds, StepMode, TransitionLabel,
};
use crate::verify::VerificationReport;

pub fn check_liveness(
    root: &Configuration,
    reliable: &BTreeSet<Role>,
    bounds: &ExploreBounds,
) -> VerificationReport {
    const PROPERTY: &str = "liveness";
    let graph = explore_configs(root, reliable, bounds, StepMode::NonCrashOfReliable);

    // Terminal analysis: maximal finite non-crashing paths are fair, so a
    // terminal state must carry no obligations.
    for (id, state) in graph.states.iter().enumerate() {
        let has_noncrash_successor =
            graph.edges[id].iter().any(|(l, _)| !l.is_crash());
        if has_noncrash_successor || graph.truncated[id] {
            continue;
        }
        if let Some(reason) = obligations(state).into_iter().next() {
            return VerificationReport::violated(
                PROPERTY,
                graph.trace_to(id),
                format!("terminal state starves an obligation: {reason}"),
                graph.state_count(),
                graph.truncation_frontiers(),
            );
        }
    }

    // Cycle analysis on the non-crashing sub-graph.
    'next_scc: for scc in non_trivial_sccs(&graph) {
        let members: HashSet<usize> = scc.iter().copied().collect();
        let mut inside_sends: HashSet<(Role, Role)> = HashSet::new();
        let mut inside_labels: HashSet<TransitionLabel> = HashSet::new();
        for &v in &scc {
            for (label, to) in &graph.edges[v] {
                if label.is_crash() || !members.contains(to) {
                    continue;
                }
                if let TransitionLabel::Send { from, to: peer, .. } = label {
                    inside_sends.insert((from.clone(), peer.clone()));
                }
                inside_labels.insert(label.clone());
            }
        }

        // Fair closure: every action enabled somewhere in the component is
        // taken inside it. Enabled actions are the explored edges plus the
        // cut-off sends; a cut send with an unserved pair makes the
        // component unjudgeable within bounds.
        for &v in &scc {
            for (label, _) in &graph.edges[v] {
                let served = match label {
                    TransitionLabel::Crash { .. } => true,
                    TransitionLabel::Send { from, to, .. } => {
                        inside_sends.contains(&(from.clone(), to.clone()))
                    }
                    other => inside_labels.contains(other),
                };
                if !served {
                    continue 'next_scc;
                }
            }
            for label in &graph.cut[v] {
                let served = match label {
                    TransitionLabel::Send { from, to, .. } => {
                        inside_sends.contains(&(from.clone(), to.clone()))
                    }
                    _ => false,
                };
                if !served {
                    continue 'next_scc;
                }
            }
        }

        // A fair lasso can cover the whole component; any starved obligation
        // at any of its states is a genuine violation.
        for &v in &scc {
            let state = &graph.states[v];
            for ((from, to), queue) in &state.queues {
                if let Some((label, payload)) = queue.head() {
                    if label.is_crash() {
                        continue;
                    }
                    let consuming = TransitionLabel::Recv {
                        by: to.clone(),
                        from: from.clone(),
                        label: label.clone(),
                        payload: payload.clone(),
                    };
                    if !inside_labels.contains(&consuming) {
                        return VerificationReport::violated(
                            PROPERTY,
                            graph.trace_to(v),
                            format!(
                                "a fair cycle never consumes {label} queued {from}->{to}"
                            ),
                            graph.state_count(),
                            graph.truncation_frontiers(),
                        );
                    }
                }
            }
            for (p, t) in &state.ctx {
                if let LocalType::External { peer, .. } = t.unfold_head() {
                    let served = inside_labels.iter().any(|l| match l {
                        TransitionLabel::Recv { by, from, .. } => by == p && from == &peer,
                        TransitionLabel::CrashDetect { by, of } => by == p && of == &peer,
                        _ => false,
                    });
                    if !served {
                        return VerificationReport::violated(
                            PROPERTY,
                            graph.trace_to(v),
                            format!("a fair cycle leaves {p} waiting on {peer} forever"),
                            graph.state_count(),
                            graph.truncation_frontiers(),
                        );
                    }
                }
            }
        }
    }

    VerificationReport::holds(PROPERTY, graph.state_count(), graph.truncation_frontiers())
}

/// Obligation descriptions for the terminal check.
fn obligations(state: &Configuration) -> Vec<String> {
    let mut out = Vec::new();
    for ((from, to), queue) in &state.queues {
        if let Some((label, _)) = queue.head() {
            if !label.is_crash() {
                out.push(format!("message {label} queued {from}->{to} is never consumed"));
            }
        }
    }
    for (p, t) in &state.ctx {
        if let LocalType::External { peer, .. } = t.unfold_head() {
            out.push(format!("{p} waits on {peer} forever"));
        }
    }
    out
}

/// Strongly connected components of the non-crashing edge relation that can
/// sustain an infinite run (more than one state, or a self loop). Iterative
/// Tarjan.
fn non_trivial_sccs(graph: &ConfigGraph) -> Vec<Vec<usize>> {
    let n = graph.state_count();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            graph.edges[v]
                .iter()
                .filter(|(l, _)| !l.is_crash())
                .map(|(_, to)| *to)
                .collect()
        })
        .collect();

    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut sccs = Vec::new();

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        // call stack of (node, next successor position)
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < succ[v].len() {
                let w = succ[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&mut (parent, _)) = call.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    let non_trivial = component.len() > 1
                        || succ[component[0]].contains(&component[0]);
                    if non_trivial {
                        sccs.push(component);
                    }
                }
            }
        }
    }
    sccs
}
