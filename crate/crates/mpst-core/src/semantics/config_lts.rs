//! One-step reductions of configurations.

use std::collections::BTreeSet;

use crate::ident::Role;
use crate::local::LocalType;
use crate::semantics::{Configuration, Queue, TransitionLabel};

/// Which crashes the step relation admits: all of them, only crashes of
/// unreliable roles, or none (the non-crashing relation used by fairness
/// and liveness).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepMode {
    All,
    NonCrashOfReliable,
    NonCrash,
}

/// All one-step successors of a configuration. Recursive entries are
/// unfolded before matching, so the returned configurations never have a
/// recursion binder at the head of an involved entry.
pub fn config_steps(
    c: &Configuration,
    reliable: &BTreeSet<Role>,
    mode: StepMode,
) -> Vec<(TransitionLabel, Configuration)> {
    let mut out = Vec::new();
    for (p, t) in &c.ctx {
        let t = t.unfold_head();
        match &t {
            LocalType::Internal { peer, branches } => {
                for b in branches {
                    let mut next = c.clone();
                    next.ctx.insert(p.clone(), b.cont.clone());
                    next.queues
                        .get_mut(&(p.clone(), peer.clone()))
                        .expect("queue exists for context pair")
                        .push(b.label.clone(), b.payload.clone());
                    out.push((
                        TransitionLabel::Send {
                            from: p.clone(),
                            to: peer.clone(),
                            label: b.label.clone(),
                            payload: b.payload.clone(),
                        },
                        next,
                    ));
                }
            }
            LocalType::External { peer, branches } => {
                let queue = c.queue(peer, p);
                if let Some((head_label, head_payload)) = queue.head() {
                    if let Some(b) = branches
                        .iter()
                        .find(|b| &b.label == head_label && &b.payload == head_payload)
                    {
                        let mut next = c.clone();
                        next.ctx.insert(p.clone(), b.cont.clone());
                        if let Some(Queue::Available { msgs }) =
                            next.queues.get_mut(&(peer.clone(), p.clone()))
                        {
                            msgs.remove(0);
                        }
                        out.push((
                            TransitionLabel::Recv {
                                by: p.clone(),
                                from: peer.clone(),
                                label: b.label.clone(),
                                payload: b.payload.clone(),
                            },
                            next,
                        ));
                    }
                } else if queue.is_empty_available()
                    && c.ctx.get(peer).map(|t| matches!(t, LocalType::Stop)).unwrap_or(false)
                {
                    // Crash detection is a last resort: only when no message
                    // from the crashed peer remains in the queue.
                    if let Some(b) = branches.iter().find(|b| b.label.is_crash()) {
                        let mut next = c.clone();
                        next.ctx.insert(p.clone(), b.cont.clone());
                        out.push((
                            TransitionLabel::CrashDetect { by: p.clone(), of: peer.clone() },
                            next,
                        ));
                    }
                }
            }
            LocalType::End | LocalType::Stop => {}
            LocalType::Rec { .. } | LocalType::Var(_) => unreachable!("unfolded head"),
        }
        // A role that is neither successfully terminated nor already crashed
        // may crash, subject to the mode.
        let may_crash = match mode {
            StepMode::All => true,
            StepMode::NonCrashOfReliable => !reliable.contains(p),
            StepMode::NonCrash => false,
        };
        if may_crash && !matches!(t, LocalType::End | LocalType::Stop) {
            let mut next = c.clone();
            next.ctx.insert(p.clone(), LocalType::Stop);
            next.make_unavailable_into(p);
            out.push((TransitionLabel::Crash { role: p.clone() }, next));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::LBranch;
    use std::collections::BTreeMap;

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    fn config(entries: Vec<(&str, LocalType)>) -> Configuration {
        let ctx: BTreeMap<Role, LocalType> =
            entries.into_iter().map(|(n, t)| (Role::new(n), t)).collect();
        Configuration::with_empty_queues(ctx)
    }

    #[test]
    fn all_end_has_no_successors() {
        let c = config(vec![("p", LocalType::End), ("q", LocalType::End)]);
        assert!(config_steps(&c, &BTreeSet::new(), StepMode::NonCrashOfReliable).is_empty());
    }

    #[test]
    fn send_then_receive() {
        let c = config(vec![
            ("p", LocalType::send("q", "l", None, LocalType::End)),
            ("q", LocalType::recv("p", "l", None, LocalType::End)),
        ]);
        let reliable: BTreeSet<Role> = [r("p"), r("q")].into_iter().collect();
        let steps = config_steps(&c, &reliable, StepMode::NonCrashOfReliable);
        assert_eq!(steps.len(), 1);
        let (label, next) = &steps[0];
        assert!(matches!(label, TransitionLabel::Send { .. }));
        let steps2 = config_steps(next, &reliable, StepMode::NonCrashOfReliable);
        assert_eq!(steps2.len(), 1);
        assert!(matches!(&steps2[0].1.ctx[&r("p")], LocalType::End));
        assert!(matches!(&steps2[0].1.ctx[&r("q")], LocalType::End));
    }

    #[test]
    fn crash_makes_queues_unavailable_and_send_is_lost() {
        let c = config(vec![
            ("p", LocalType::send("q", "l", None, LocalType::End)),
            ("q", LocalType::recv("p", "l", None, LocalType::End)),
        ]);
        let steps = config_steps(&c, &BTreeSet::new(), StepMode::NonCrashOfReliable);
        let (_, after_crash) = steps
            .iter()
            .find(|(l, _)| l == &TransitionLabel::Crash { role: r("q") })
            .expect("q crashes");
        assert_eq!(after_crash.queue(&r("p"), &r("q")), &Queue::Unavailable);
        // p's send is now lost.
        let steps2 = config_steps(after_crash, &BTreeSet::new(), StepMode::NonCrashOfReliable);
        let (_, after_send) = steps2
            .iter()
            .find(|(l, _)| matches!(l, TransitionLabel::Send { .. }))
            .expect("send still fires");
        assert_eq!(after_send.queue(&r("p"), &r("q")), &Queue::Unavailable);
    }

    #[test]
    fn crash_detection_only_on_empty_queue() {
        let handler = LocalType::external(
            "p",
            vec![
                LBranch::new("l", None, LocalType::End),
                LBranch::new("crash", None, LocalType::Stop),
            ],
        );
        // p crashed but a message from p is still queued: it must be
        // received first.
        let mut c = config(vec![("p", LocalType::Stop), ("q", handler.clone())]);
        c.queues.insert(
            (r("p"), r("q")),
            Queue::Available { msgs: vec![(crate::ident::Label::new("l"), None)] },
        );
        let steps = config_steps(&c, &BTreeSet::new(), StepMode::NonCrash);
        assert_eq!(steps.len(), 1);
        assert!(matches!(&steps[0].0, TransitionLabel::Recv { .. }));
        // With the queue empty, detection fires instead.
        let c2 = config(vec![("p", LocalType::Stop), ("q", handler)]);
        let steps2 = config_steps(&c2, &BTreeSet::new(), StepMode::NonCrash);
        assert_eq!(steps2.len(), 1);
        assert_eq!(steps2[0].0, TransitionLabel::CrashDetect { by: r("q"), of: r("p") });
        assert!(matches!(&steps2[0].1.ctx[&r("q")], LocalType::Stop));
    }

    #[test]
    fn label_mismatch_blocks_receive() {
        let mut c = config(vec![
            ("p", LocalType::End),
            ("q", LocalType::recv("p", "expected", None, LocalType::End)),
        ]);
        c.queues.insert(
            (r("p"), r("q")),
            Queue::Available { msgs: vec![(crate::ident::Label::new("other"), None)] },
        );
        assert!(config_steps(&c, &BTreeSet::new(), StepMode::NonCrash).is_empty());
    }

    #[test]
    fn mode_controls_crashes() {
        let c = config(vec![
            ("p", LocalType::send("q", "l", None, LocalType::End)),
            ("q", LocalType::recv("p", "l", None, LocalType::End)),
        ]);
        let reliable: BTreeSet<Role> = [r("p")].into_iter().collect();
        let all = config_steps(&c, &reliable, StepMode::All);
        assert_eq!(all.iter().filter(|(l, _)| l.is_crash()).count(), 2);
        let no_reliable = config_steps(&c, &reliable, StepMode::NonCrashOfReliable);
        assert_eq!(no_reliable.iter().filter(|(l, _)| l.is_crash()).count(), 1);
        let none = config_steps(&c, &reliable, StepMode::NonCrash);
        assert_eq!(none.iter().filter(|(l, _)| l.is_crash()).count(), 0);
    }

    #[test]
    fn recursion_unfolds_before_stepping() {
        let c = config(vec![
            ("p", LocalType::rec("t", LocalType::send("q", "l", None, LocalType::var("t")))),
            ("q", LocalType::rec("t", LocalType::recv("p", "l", None, LocalType::var("t")))),
        ]);
        let reliable: BTreeSet<Role> = [r("p"), r("q")].into_iter().collect();
        let steps = config_steps(&c, &reliable, StepMode::NonCrashOfReliable);
        assert_eq!(steps.len(), 1);
        // The successor loops back to a state with the same canonical key
        // after the matching receive.
        let after = config_steps(&steps[0].1, &reliable, StepMode::NonCrashOfReliable);
        let (_, back) = after
            .iter()
            .find(|(l, _)| matches!(l, TransitionLabel::Recv { .. }))
            .unwrap();
        assert_eq!(back.state_key(), c.state_key());
    }
}
