//! One-step reductions of annotated global types.

use std::collections::BTreeSet;

use crate::global::{remove_role, GBranch, GlobalType};
use crate::ident::{RecVar, Role};
use crate::semantics::{AnnotatedGlobal, TransitionLabel};

/// A single reduction together with the recursion binders unfolded while
/// deriving it. The exploration driver charges those unfoldings against its
/// per-binder fuel budget; the step itself is exact.
#[derive(Clone, Debug)]
pub struct GlobalStep {
    pub label: TransitionLabel,
    pub next: AnnotatedGlobal,
    pub unfolded: Vec<RecVar>,
}

/// All one-step successors of `(C, G)` under the reliable set.
///
/// Send and receive steps exclude the crash pseudo-label; a live unreliable
/// role may crash whenever it is active (recursion is unfolded first);
/// reductions under a prefix require every continuation to make the step and
/// its subject to be disjoint from the prefix roles.
pub fn global_steps(state: &AnnotatedGlobal, reliable: &BTreeSet<Role>) -> Vec<GlobalStep> {
    let mut unfolded = Vec::new();
    let mut g = state.gtype.clone();
    while let GlobalType::Rec { var, .. } = &g {
        unfolded.push(var.clone());
        g = g.unfold_once();
    }

    let mut steps = Vec::new();

    // Crash steps apply at the top level only: lifting a crash under a
    // prefix by the context rules produces the same reduct as removing the
    // role from the whole type.
    for role in g.active_roles() {
        if reliable.contains(&role) {
            continue;
        }
        let pruned = remove_role(&g, &role).expect("active role removal");
        let mut crashed = state.crashed.clone();
        crashed.insert(role.clone());
        steps.push(GlobalStep {
            label: TransitionLabel::Crash { role },
            next: AnnotatedGlobal::with_crashed(crashed, pruned),
            unfolded: unfolded.clone(),
        });
    }

    let mut memo = Memo::default();
    for (label, next, extra) in comm_steps(&g, &mut memo) {
        let mut unf = unfolded.clone();
        unf.extend(extra);
        steps.push(GlobalStep {
            label,
            next: AnnotatedGlobal::with_crashed(state.crashed.clone(), next),
            unfolded: unf,
        });
    }
    steps
}

type CommSteps = Vec<(TransitionLabel, GlobalType, Vec<RecVar>)>;

/// Memoised step sets per canonical subterm. `None` marks a computation in
/// progress: the step judgement is inductively defined, so a cyclic premise
/// derives nothing. Contractive types have a finite closure of subterms of
/// unfoldings, which bounds the recursion.
#[derive(Default)]
struct Memo(std::collections::HashMap<String, Option<CommSteps>>);

/// Non-crash-label steps (sends, receives, crash detections), including
/// those derived under prefixes by the context rules.
fn comm_steps(g: &GlobalType, memo: &mut Memo) -> CommSteps {
    let key = g.canon_key();
    match memo.0.get(&key) {
        Some(Some(steps)) => return steps.clone(),
        Some(None) => return Vec::new(),
        None => {}
    }
    memo.0.insert(key.clone(), None);
    let steps = comm_steps_uncached(g, memo);
    memo.0.insert(key, Some(steps.clone()));
    steps
}

fn comm_steps_uncached(g: &GlobalType, memo: &mut Memo) -> CommSteps {
    match g {
        GlobalType::Rec { var, .. } => {
            let mut out = comm_steps(&g.unfold_once(), memo);
            for (_, _, unf) in out.iter_mut() {
                unf.insert(0, var.clone());
            }
            out
        }
        GlobalType::Comm { sender, receiver, receiver_crashed, branches } => {
            let mut out = Vec::new();
            for (j, b) in branches.iter().enumerate() {
                if b.label.is_crash() {
                    continue;
                }
                let label = TransitionLabel::Send {
                    from: sender.clone(),
                    to: receiver.clone(),
                    label: b.label.clone(),
                    payload: b.payload.clone(),
                };
                if *receiver_crashed {
                    // The receiver has crashed: the message is orphaned and
                    // the protocol commits to the chosen branch outright.
                    out.push((label, b.cont.clone(), Vec::new()));
                } else {
                    out.push((
                        label,
                        GlobalType::Transit {
                            sender: sender.clone(),
                            sender_crashed: false,
                            receiver: receiver.clone(),
                            branches: branches.clone(),
                            committed: j,
                        },
                        Vec::new(),
                    ));
                }
            }
            lift_context(g, branches, &[sender.clone(), receiver.clone()], &mut out, memo);
            out
        }
        GlobalType::Transit { sender, sender_crashed, receiver, branches, committed } => {
            let mut out = Vec::new();
            let b = &branches[*committed];
            if !b.label.is_crash() {
                out.push((
                    TransitionLabel::Recv {
                        by: receiver.clone(),
                        from: sender.clone(),
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                    },
                    b.cont.clone(),
                    Vec::new(),
                ));
            } else if *sender_crashed {
                out.push((
                    TransitionLabel::CrashDetect { by: receiver.clone(), of: sender.clone() },
                    b.cont.clone(),
                    Vec::new(),
                ));
            }
            lift_context(g, branches, &[receiver.clone()], &mut out, memo);
            out
        }
        GlobalType::Var(_) | GlobalType::End => Vec::new(),
    }
}

/// Lift steps common to every continuation of a prefix, provided the
/// subject does not clash with the prefix roles.
fn lift_context(
    g: &GlobalType,
    branches: &[GBranch],
    prefix_roles: &[Role],
    out: &mut CommSteps,
    memo: &mut Memo,
) {
    let first_steps = comm_steps(&branches[0].cont, memo);
    'candidates: for (label, first_next, first_unf) in first_steps {
        if prefix_roles.contains(label.subject()) {
            continue;
        }
        let mut conts = vec![(first_next, first_unf)];
        for b in &branches[1..] {
            let matching = comm_steps(&b.cont, memo)
                .into_iter()
                .find(|(l, _, _)| *l == label);
            match matching {
                Some((_, next, unf)) => conts.push((next, unf)),
                None => continue 'candidates,
            }
        }
        let mut new_branches = Vec::with_capacity(branches.len());
        let mut unfolded = Vec::new();
        for (b, (next, unf)) in branches.iter().zip(conts) {
            new_branches.push(GBranch { label: b.label.clone(), payload: b.payload.clone(), cont: next });
            unfolded.extend(unf);
        }
        let next = match g {
            GlobalType::Comm { sender, receiver, receiver_crashed, .. } => GlobalType::Comm {
                sender: sender.clone(),
                receiver: receiver.clone(),
                receiver_crashed: *receiver_crashed,
                branches: new_branches,
            },
            GlobalType::Transit { sender, sender_crashed, receiver, committed, .. } => {
                GlobalType::Transit {
                    sender: sender.clone(),
                    sender_crashed: *sender_crashed,
                    receiver: receiver.clone(),
                    branches: new_branches,
                    committed: *committed,
                }
            }
            _ => unreachable!("context lifting applies to prefixes"),
        };
        out.push((label, next, unfolded));
    }
}
