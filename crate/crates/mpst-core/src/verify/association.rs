//! The association invariant between annotated global types and
//! configurations.

use std::collections::BTreeSet;

use crate::global::GlobalType;
use crate::ident::Role;
use crate::local::LocalType;
use crate::projection::project;
use crate::semantics::{AnnotatedGlobal, Configuration, Queue};
use crate::subtyping::is_subtype;

/// The successful split of the typing context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssociationWitness {
    /// Roles typed by subtypes of their projections (the active part).
    pub projected: BTreeSet<Role>,
    /// Crashed roles, all typed `stop`.
    pub crashed: BTreeSet<Role>,
    /// The remaining roles, all typed `end`.
    pub ended: BTreeSet<Role>,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum AssociationFailure {
    #[error("(A1) role {role}: {reason}")]
    NotProjection { role: Role, reason: String },
    #[error("(A2) crashed role {role} is typed {found}, not stop")]
    CrashedNotStop { role: Role, found: String },
    #[error("(A2) crashed role {role} is missing from the context")]
    CrashedMissing { role: Role },
    #[error("(A3) role {role} is neither active nor crashed but is typed {found}, not end")]
    LeftoverNotEnd { role: Role, found: String },
    #[error("role {role} is both active in the global type and in the crashed set")]
    ActiveAndCrashed { role: Role },
    #[error("(A4a) queues into {role} are {found}, but the role is {expected}")]
    QueueAvailability { role: Role, found: String, expected: String },
    #[error("(A4b) queue {from}->{to} should be empty but holds {found} messages")]
    QueueNotEmpty { from: Role, to: Role, found: usize },
    #[error("(A4d) queue {from}->{to} should begin with {expected}, found {found}")]
    QueueHeadMismatch { from: Role, to: Role, expected: String, found: String },
}

/// Check that the configuration is associated with the annotated global
/// type: the context splits into projections / crashed / ended roles, and
/// the queues record exactly the transmissions en route.
pub fn check_association(
    state: &AnnotatedGlobal,
    config: &Configuration,
    reliable: &BTreeSet<Role>,
) -> Result<AssociationWitness, AssociationFailure> {
    let active = state.gtype.active_roles();

    // Context split.
    let mut witness = AssociationWitness {
        projected: BTreeSet::new(),
        crashed: BTreeSet::new(),
        ended: BTreeSet::new(),
    };
    for role in &active {
        if state.crashed.contains(role) {
            return Err(AssociationFailure::ActiveAndCrashed { role: role.clone() });
        }
        let Some(t) = config.ctx.get(role) else {
            return Err(AssociationFailure::NotProjection {
                role: role.clone(),
                reason: "missing from the context".into(),
            });
        };
        let projected = project(&state.gtype, role, reliable).map_err(|e| {
            AssociationFailure::NotProjection { role: role.clone(), reason: e.to_string() }
        })?;
        if !is_subtype(t, &projected) {
            return Err(AssociationFailure::NotProjection {
                role: role.clone(),
                reason: format!("{t} is not a subtype of {projected}"),
            });
        }
        witness.projected.insert(role.clone());
    }
    for role in &state.crashed {
        match config.ctx.get(role) {
            None => return Err(AssociationFailure::CrashedMissing { role: role.clone() }),
            Some(LocalType::Stop) => {
                witness.crashed.insert(role.clone());
            }
            Some(other) => {
                return Err(AssociationFailure::CrashedNotStop {
                    role: role.clone(),
                    found: other.to_string(),
                })
            }
        }
    }
    for (role, t) in &config.ctx {
        if active.contains(role) || state.crashed.contains(role) {
            continue;
        }
        if !matches!(t, LocalType::End) {
            return Err(AssociationFailure::LeftoverNotEnd {
                role: role.clone(),
                found: t.to_string(),
            });
        }
        witness.ended.insert(role.clone());
    }

    // (A4a) queues into a role are unavailable iff it has crashed.
    for role in config.ctx.keys() {
        let into: Vec<&Queue> = config
            .queues
            .iter()
            .filter(|((_, to), _)| to == role)
            .map(|(_, q)| q)
            .collect();
        let crashed = state.crashed.contains(role);
        let all_unavailable = into.iter().all(|q| matches!(q, Queue::Unavailable));
        let none_unavailable = into.iter().all(|q| !matches!(q, Queue::Unavailable));
        if crashed && !all_unavailable {
            return Err(AssociationFailure::QueueAvailability {
                role: role.clone(),
                found: "available".into(),
                expected: "crashed (all queues unavailable)".into(),
            });
        }
        if !crashed && !none_unavailable {
            return Err(AssociationFailure::QueueAvailability {
                role: role.clone(),
                found: "unavailable".into(),
                expected: "live (no queue unavailable)".into(),
            });
        }
    }

    // (A4b-d) the queues record the messages en route, in order.
    check_queues(&state.gtype, &state.crashed, config.queues.clone(), config)?;

    Ok(witness)
}

fn check_queues(
    g: &GlobalType,
    crashed: &BTreeSet<Role>,
    queues: std::collections::BTreeMap<(Role, Role), Queue>,
    config: &Configuration,
) -> Result<(), AssociationFailure> {
    match g {
        GlobalType::End | GlobalType::Rec { .. } | GlobalType::Var(_) => {
            // Nothing is en route: all queues between live roles are empty.
            for ((from, to), q) in &queues {
                if crashed.contains(to) {
                    continue;
                }
                if q.len() > 0 {
                    return Err(AssociationFailure::QueueNotEmpty {
                        from: from.clone(),
                        to: to.clone(),
                        found: q.len(),
                    });
                }
            }
            Ok(())
        }
        GlobalType::Comm { sender, receiver, receiver_crashed, branches } => {
            if !receiver_crashed {
                let q = queues
                    .get(&(sender.clone(), receiver.clone()))
                    .cloned()
                    .unwrap_or_else(Queue::empty);
                if q.len() > 0 {
                    return Err(AssociationFailure::QueueNotEmpty {
                        from: sender.clone(),
                        to: receiver.clone(),
                        found: q.len(),
                    });
                }
            }
            for b in branches {
                check_queues(&b.cont, crashed, queues.clone(), config)?;
            }
            Ok(())
        }
        GlobalType::Transit { sender, receiver, branches, committed, .. } => {
            let b = &branches[*committed];
            if b.label.is_crash() {
                // A pseudo-message is en route: nothing sits in the queue.
                let q = queues
                    .get(&(sender.clone(), receiver.clone()))
                    .cloned()
                    .unwrap_or_else(Queue::empty);
                if q.len() > 0 {
                    return Err(AssociationFailure::QueueNotEmpty {
                        from: sender.clone(),
                        to: receiver.clone(),
                        found: q.len(),
                    });
                }
                for b in branches {
                    check_queues(&b.cont, crashed, queues.clone(), config)?;
                }
                Ok(())
            } else {
                let q = queues
                    .get(&(sender.clone(), receiver.clone()))
                    .cloned()
                    .unwrap_or_else(Queue::empty);
                let rest = match &q {
                    Queue::Available { msgs } => match msgs.split_first() {
                        Some(((label, payload), rest))
                            if label == &b.label && payload == &b.payload =>
                        {
                            rest.to_vec()
                        }
                        other => {
                            return Err(AssociationFailure::QueueHeadMismatch {
                                from: sender.clone(),
                                to: receiver.clone(),
                                expected: b.label.to_string(),
                                found: other
                                    .map(|((l, _), _)| l.to_string())
                                    .unwrap_or_else(|| "an empty queue".into()),
                            })
                        }
                    },
                    Queue::Unavailable => {
                        return Err(AssociationFailure::QueueHeadMismatch {
                            from: sender.clone(),
                            to: receiver.clone(),
                            expected: b.label.to_string(),
                            found: "an unavailable queue".into(),
                        })
                    }
                };
                let mut popped = queues.clone();
                popped.insert((sender.clone(), receiver.clone()), Queue::Available { msgs: rest });
                for b in branches {
                    check_queues(&b.cont, crashed, popped.clone(), config)?;
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::global::{remove_role, GBranch};
    use crate::semantics::StepMode;

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    fn simpler_logging() -> GlobalType {
        let read_cont = GlobalType::comm(
            "I",
            "L",
            vec![GBranch::new(
                "read",
                None,
                GlobalType::comm(
                    "L",
                    "I",
                    vec![GBranch::new(
                        "report",
                        Some(crate::ident::Sort::new("log")),
                        GlobalType::comm(
                            "I",
                            "C",
                            vec![GBranch::new(
                                "report",
                                Some(crate::ident::Sort::new("log")),
                                GlobalType::End,
                            )],
                        ),
                    )],
                ),
            )],
        );
        let crash_cont =
            GlobalType::comm("I", "L", vec![GBranch::new("fatal", None, GlobalType::End)]);
        GlobalType::comm(
            "L",
            "I",
            vec![GBranch::new(
                "trigger",
                None,
                GlobalType::comm(
                    "C",
                    "I",
                    vec![
                        GBranch::new("read", None, read_cont),
                        GBranch::new("crash", None, crash_cont),
                    ],
                ),
            )],
        )
    }

    fn reliable() -> BTreeSet<Role> {
        [r("L"), r("I")].into_iter().collect()
    }

    fn roles() -> BTreeSet<Role> {
        [r("C"), r("L"), r("I")].into_iter().collect()
    }

    #[test]
    fn projected_configuration_is_associated() {
        let g = simpler_logging();
        let config = Configuration::projected(&g, &roles(), &reliable()).unwrap();
        let witness =
            check_association(&AnnotatedGlobal::new(g), &config, &reliable()).unwrap();
        assert_eq!(witness.projected, roles());
        assert!(witness.crashed.is_empty());
        assert!(witness.ended.is_empty());
    }

    #[test]
    fn association_after_crash_step() {
        let g = simpler_logging();
        let config = Configuration::projected(&g, &roles(), &reliable()).unwrap();
        // Crash C on both sides.
        let pruned = remove_role(&g, &r("C")).unwrap();
        let state = AnnotatedGlobal::with_crashed([r("C")].into_iter().collect(), pruned);
        let (_, crashed_config) =
            crate::semantics::config_steps(&config, &reliable(), StepMode::NonCrashOfReliable)
                .into_iter()
                .find(|(l, _)| l == &crate::semantics::TransitionLabel::Crash { role: r("C") })
                .expect("C can crash");
        let witness = check_association(&state, &crashed_config, &reliable()).unwrap();
        assert_eq!(witness.crashed, [r("C")].into_iter().collect());
        assert_eq!(witness.projected, [r("L"), r("I")].into_iter().collect());
    }

    #[test]
    fn empty_queue_into_crashed_role_fails_a4a() {
        let g = simpler_logging();
        let config = Configuration::projected(&g, &roles(), &reliable()).unwrap();
        let pruned = remove_role(&g, &r("C")).unwrap();
        let state = AnnotatedGlobal::with_crashed([r("C")].into_iter().collect(), pruned);
        let mut bad = config.clone();
        bad.ctx.insert(r("C"), LocalType::Stop);
        // Queues into C stay empty-available instead of unavailable.
        let err = check_association(&state, &bad, &reliable()).unwrap_err();
        assert!(matches!(err, AssociationFailure::QueueAvailability { .. }));
    }

    #[test]
    fn vacuous_association_of_end() {
        let state = AnnotatedGlobal::new(GlobalType::End);
        let config = Configuration::with_empty_queues(Default::default());
        let witness = check_association(&state, &config, &BTreeSet::new()).unwrap();
        assert!(witness.projected.is_empty());
        assert!(witness.crashed.is_empty());
    }

    #[test]
    fn en_route_message_must_head_the_queue() {
        // p~>q:a{a.end} with an empty queue: association fails at (A4d).
        let g = GlobalType::Transit {
            sender: r("p"),
            sender_crashed: false,
            receiver: r("q"),
            branches: vec![GBranch::new("a", None, GlobalType::End)],
            committed: 0,
        };
        let mut ctx = std::collections::BTreeMap::new();
        ctx.insert(r("p"), LocalType::End);
        ctx.insert(r("q"), LocalType::recv("p", "a", None, LocalType::End));
        let config = Configuration::with_empty_queues(ctx);
        let reliable: BTreeSet<Role> = [r("p"), r("q")].into_iter().collect();
        let err = check_association(&AnnotatedGlobal::new(g.clone()), &config, &reliable)
            .unwrap_err();
        assert!(matches!(err, AssociationFailure::QueueHeadMismatch { .. }));
        // With the message queued, the association holds.
        let mut good = config.clone();
        good.queues.insert(
            (r("p"), r("q")),
            Queue::Available { msgs: vec![(crate::ident::Label::new("a"), None)] },
        );
        assert!(check_association(&AnnotatedGlobal::new(g), &good, &reliable).is_ok());
    }
}
