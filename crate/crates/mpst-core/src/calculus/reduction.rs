//! Session reductions with crash-stop failures.

use std::collections::BTreeSet;

use crate::calculus::{congruence_normalize, Process, SessQueue, Session};
use crate::ident::Role;
use crate::semantics::TransitionLabel;

/// All enabled reductions of a (normalized) session. Successors are
/// returned in normal form, which quotients away the raw structural
/// nondeterminism and makes reduction deterministic per label.
pub fn session_steps(m: &Session, reliable: &BTreeSet<Role>) -> Vec<(TransitionLabel, Session)> {
    let mut out = Vec::new();
    for (p, (proc, queue)) in &m.entries {
        let proc = proc.unfold_head();
        match &proc {
            Process::Output { peer, label, expr, cont } => {
                let value = expr
                    .as_ref()
                    .map(|e| e.eval(&Default::default()).expect("closed well-sorted expression"));
                let mut next = m.clone();
                next.entries.insert(p.clone(), ((**cont).clone(), queue.clone()));
                // Deliver into the peer's incoming queue; an entry erased by
                // congruence is an inactive process with an empty queue.
                let entry = next
                    .entries
                    .entry(peer.clone())
                    .or_insert_with(|| (Process::Inact, SessQueue::empty()));
                match &mut entry.1 {
                    SessQueue::Msgs(msgs) => {
                        msgs.push((p.clone(), label.clone(), value.clone()))
                    }
                    SessQueue::Unavailable => {} // r-send-#: the message is lost
                }
                out.push((
                    TransitionLabel::Send {
                        from: p.clone(),
                        to: peer.clone(),
                        label: label.clone(),
                        payload: value.map(|v| v.sort()),
                    },
                    congruence_normalize(&next),
                ));
            }
            Process::ExtChoice { peer, branches } => {
                let SessQueue::Msgs(msgs) = queue else {
                    // A crashed role's queue; its process is crashed too and
                    // never reduces.
                    continue;
                };
                let from_peer = msgs.iter().position(|(origin, _, _)| origin == peer);
                match from_peer {
                    Some(at) => {
                        let (_, label, value) = msgs[at].clone();
                        if let Some(b) = branches.iter().find(|b| b.label == label) {
                            let body = match (&b.binder, &value) {
                                (Some((x, _)), Some(v)) => b.body.substitute_val(x, v),
                                (None, None) => b.body.clone(),
                                _ => continue, // arity mismatch: not receivable
                            };
                            let mut next = m.clone();
                            let mut rest = msgs.clone();
                            rest.remove(at);
                            next.entries.insert(p.clone(), (body, SessQueue::Msgs(rest)));
                            out.push((
                                TransitionLabel::Recv {
                                    by: p.clone(),
                                    from: peer.clone(),
                                    label,
                                    payload: value.map(|v| v.sort()),
                                },
                                congruence_normalize(&next),
                            ));
                        }
                    }
                    None => {
                        // Crash detection as a last resort: no message from
                        // the peer remains and the peer has crashed.
                        let peer_crashed = m
                            .entries
                            .get(peer)
                            .map(|(p, _)| matches!(p, Process::Crashed))
                            .unwrap_or(false);
                        if peer_crashed {
                            if let Some(b) = branches.iter().find(|b| b.label.is_crash()) {
                                let mut next = m.clone();
                                next.entries.insert(p.clone(), (b.body.clone(), queue.clone()));
                                out.push((
                                    TransitionLabel::CrashDetect { by: p.clone(), of: peer.clone() },
                                    congruence_normalize(&next),
                                ));
                            }
                        }
                    }
                }
            }
            Process::If { cond, then_p, else_p } => {
                let taken = match cond.eval(&Default::default()) {
                    Ok(crate::calculus::Value::Bool(true)) => then_p,
                    Ok(crate::calculus::Value::Bool(false)) => else_p,
                    _ => continue,
                };
                let mut next = m.clone();
                next.entries.insert(p.clone(), ((**taken).clone(), queue.clone()));
                out.push((
                    TransitionLabel::Cond { role: p.clone() },
                    congruence_normalize(&next),
                ));
            }
            Process::Inact | Process::Crashed => {}
            Process::Rec { .. } | Process::Var(_) => unreachable!("unfolded head"),
        }
        // r-crash: an active process at an unreliable role may crash.
        if !matches!(proc, Process::Inact | Process::Crashed) && !reliable.contains(p) {
            let mut next = m.clone();
            next.entries.insert(p.clone(), (Process::Crashed, SessQueue::Unavailable));
            out.push((
                TransitionLabel::Crash { role: p.clone() },
                congruence_normalize(&next),
            ));
        }
    }
    out
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
#[error("schedule step {index}: {wanted} is not enabled (enabled: [{}])",
        enabled.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", "))]
pub struct ScheduleMismatch {
    pub index: usize,
    pub wanted: TransitionLabel,
    pub enabled: Vec<TransitionLabel>,
}

/// Deterministically replay a schedule of labels.
pub fn run_schedule(
    m: &Session,
    reliable: &BTreeSet<Role>,
    schedule: &[TransitionLabel],
) -> Result<Session, ScheduleMismatch> {
    let mut at = congruence_normalize(m);
    for (index, wanted) in schedule.iter().enumerate() {
        let steps = session_steps(&at, reliable);
        match steps.iter().find(|(l, _)| l == wanted) {
            Some((_, next)) => at = next.clone(),
            None => {
                return Err(ScheduleMismatch {
                    index,
                    wanted: wanted.clone(),
                    enabled: steps.into_iter().map(|(l, _)| l).collect(),
                })
            }
        }
    }
    Ok(at)
}
