//! Global types with crash annotations and en-route transmissions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ident::{Label, RecVar, Role, Sort};

/// One branch of a transmission: a label, an optional payload sort, and the
/// continuation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GBranch {
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload: Option<Sort>,
    pub cont: GlobalType,
}

impl GBranch {
    pub fn new(label: impl Into<Label>, payload: Option<Sort>, cont: GlobalType) -> Self {
        GBranch { label: label.into(), payload, cont }
    }
}

/// A global protocol type.
///
/// `Comm` is an ordinary transmission `p -> q { l_i(S_i). G_i }`; the
/// receiver may carry a crash annotation at runtime. `Transit` is the
/// runtime construct `p ~> q : j { ... }` recording a message that has been
/// sent (branch `committed`) but not yet received; there the *sender* may
/// carry the crash annotation. Branch order is preserved from the source so
/// that prefix numbering for channel generation is stable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalType {
    Comm {
        sender: Role,
        receiver: Role,
        #[serde(skip_serializing_if = "std::ops::Not::not", default)]
        receiver_crashed: bool,
        branches: Vec<GBranch>,
    },
    Transit {
        sender: Role,
        #[serde(skip_serializing_if = "std::ops::Not::not", default)]
        sender_crashed: bool,
        receiver: Role,
        branches: Vec<GBranch>,
        /// Index into `branches` of the message en route.
        committed: usize,
    },
    Rec {
        var: RecVar,
        body: Box<GlobalType>,
    },
    Var(RecVar),
    End,
}

impl GlobalType {
    pub fn comm(sender: impl Into<Role>, receiver: impl Into<Role>, branches: Vec<GBranch>) -> Self {
        GlobalType::Comm {
            sender: sender.into(),
            receiver: receiver.into(),
            receiver_crashed: false,
            branches,
        }
    }

    pub fn rec(var: impl Into<RecVar>, body: GlobalType) -> Self {
        GlobalType::Rec { var: var.into(), body: Box::new(body) }
    }

    pub fn var(var: impl Into<RecVar>) -> Self {
        GlobalType::Var(var.into())
    }

    pub fn branches(&self) -> Option<&[GBranch]> {
        match self {
            GlobalType::Comm { branches, .. } | GlobalType::Transit { branches, .. } => {
                Some(branches)
            }
            _ => None,
        }
    }

    /// Free recursion variables.
    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        fn go(g: &GlobalType, bound: &mut Vec<RecVar>, out: &mut BTreeSet<RecVar>) {
            match g {
                GlobalType::Comm { branches, .. } | GlobalType::Transit { branches, .. } => {
                    for b in branches {
                        go(&b.cont, bound, out);
                    }
                }
                GlobalType::Rec { var, body } => {
                    bound.push(var.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                GlobalType::Var(v) => {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
                GlobalType::End => {}
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Every recursion binder is guarded by a transmission prefix.
    pub fn is_contractive(&self) -> bool {
        fn go(g: &GlobalType, pending: &mut Vec<RecVar>) -> bool {
            match g {
                GlobalType::Comm { branches, .. } | GlobalType::Transit { branches, .. } => {
                    branches.iter().all(|b| go(&b.cont, &mut Vec::new()))
                }
                GlobalType::Rec { var, body } => {
                    pending.push(var.clone());
                    let ok = go(body, pending);
                    pending.pop();
                    ok
                }
                GlobalType::Var(v) => !pending.contains(v),
                GlobalType::End => true,
            }
        }
        go(self, &mut Vec::new())
    }

    /// True if the type contains no runtime constructs (crash annotations or
    /// transmissions en route).
    pub fn is_design_time(&self) -> bool {
        match self {
            GlobalType::Comm { receiver_crashed, branches, .. } => {
                !receiver_crashed && branches.iter().all(|b| b.cont.is_design_time())
            }
            GlobalType::Transit { .. } => false,
            GlobalType::Rec { body, .. } => body.is_design_time(),
            GlobalType::Var(_) | GlobalType::End => true,
        }
    }

    /// Capture-avoiding substitution of `var` by `with`.
    pub fn substitute(&self, var: &RecVar, with: &GlobalType) -> GlobalType {
        match self {
            GlobalType::Comm { sender, receiver, receiver_crashed, branches } => GlobalType::Comm {
                sender: sender.clone(),
                receiver: receiver.clone(),
                receiver_crashed: *receiver_crashed,
                branches: branches
                    .iter()
                    .map(|b| GBranch {
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                        cont: b.cont.substitute(var, with),
                    })
                    .collect(),
            },
            GlobalType::Transit { sender, sender_crashed, receiver, branches, committed } => {
                GlobalType::Transit {
                    sender: sender.clone(),
                    sender_crashed: *sender_crashed,
                    receiver: receiver.clone(),
                    branches: branches
                        .iter()
                        .map(|b| GBranch {
                            label: b.label.clone(),
                            payload: b.payload.clone(),
                            cont: b.cont.substitute(var, with),
                        })
                        .collect(),
                    committed: *committed,
                }
            }
            GlobalType::Rec { var: v, body } => {
                if v == var {
                    self.clone()
                } else {
                    GlobalType::Rec { var: v.clone(), body: Box::new(body.substitute(var, with)) }
                }
            }
            GlobalType::Var(v) => {
                if v == var {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            GlobalType::End => GlobalType::End,
        }
    }

    /// `unfold(mu t. G) = G[mu t. G / t]`; identity on everything else.
    pub fn unfold_once(&self) -> GlobalType {
        match self {
            GlobalType::Rec { var, body } => body.substitute(var, self),
            _ => self.clone(),
        }
    }

    /// Unfold until the head is not a recursion binder.
    pub fn unfold_head(&self) -> GlobalType {
        let mut g = self.clone();
        while matches!(g, GlobalType::Rec { .. }) {
            g = g.unfold_once();
        }
        g
    }

    /// The set of *active* roles: occurrences carrying a crash annotation are
    /// excluded, and the sender of a transmission en route is not active on
    /// account of that prefix (it has already sent).
    pub fn active_roles(&self) -> BTreeSet<Role> {
        let mut out = BTreeSet::new();
        self.visit_role_sets(&mut out, &mut BTreeSet::new());
        out
    }

    /// The set of *crashed* roles: only crash-annotated occurrences count; a
    /// crashed sender of a transmission en route does not count unless it
    /// appears crashed in some continuation.
    pub fn crashed_roles(&self) -> BTreeSet<Role> {
        let mut crashed = BTreeSet::new();
        self.visit_role_sets(&mut BTreeSet::new(), &mut crashed);
        crashed
    }

    fn visit_role_sets(&self, active: &mut BTreeSet<Role>, crashed: &mut BTreeSet<Role>) {
        match self {
            GlobalType::Comm { sender, receiver, receiver_crashed, branches } => {
                active.insert(sender.clone());
                if *receiver_crashed {
                    crashed.insert(receiver.clone());
                } else {
                    active.insert(receiver.clone());
                }
                for b in branches {
                    b.cont.visit_role_sets(active, crashed);
                }
            }
            GlobalType::Transit { receiver, branches, .. } => {
                active.insert(receiver.clone());
                for b in branches {
                    b.cont.visit_role_sets(active, crashed);
                }
            }
            // Unfolding the binder cannot add roles beyond those occurring in
            // the body, so recursion variables contribute nothing.
            GlobalType::Rec { body, .. } => body.visit_role_sets(active, crashed),
            GlobalType::Var(_) | GlobalType::End => {}
        }
    }

    /// Canonical textual form, recursion variables numbered de Bruijn style
    /// and branches sorted by label; used as a hashing key for visited sets.
    pub fn canon_key(&self) -> String {
        let mut s = String::new();
        self.write_canon(&mut Vec::new(), &mut s);
        s
    }

    fn write_canon(&self, bound: &mut Vec<RecVar>, out: &mut String) {
        use std::fmt::Write;
        match self {
            GlobalType::Comm { sender, receiver, receiver_crashed, branches } => {
                let _ = write!(out, "C{sender}>{receiver}{}(", if *receiver_crashed { "!" } else { "" });
                let mut sorted: Vec<&GBranch> = branches.iter().collect();
                sorted.sort_by(|a, b| a.label.cmp(&b.label));
                for b in sorted {
                    let _ = write!(out, "{}:", b.label);
                    if let Some(p) = &b.payload {
                        let _ = write!(out, "{p}");
                    }
                    out.push('.');
                    b.cont.write_canon(bound, out);
                    out.push(',');
                }
                out.push(')');
            }
            GlobalType::Transit { sender, sender_crashed, receiver, branches, committed } => {
                let committed_label = &branches[*committed].label;
                let _ = write!(
                    out,
                    "T{sender}{}>{receiver}@{committed_label}(",
                    if *sender_crashed { "!" } else { "" }
                );
                let mut sorted: Vec<&GBranch> = branches.iter().collect();
                sorted.sort_by(|a, b| a.label.cmp(&b.label));
                for b in sorted {
                    let _ = write!(out, "{}:", b.label);
                    if let Some(p) = &b.payload {
                        let _ = write!(out, "{p}");
                    }
                    out.push('.');
                    b.cont.write_canon(bound, out);
                    out.push(',');
                }
                out.push(')');
            }
            GlobalType::Rec { var, body } => {
                out.push('R');
                bound.push(var.clone());
                body.write_canon(bound, out);
                bound.pop();
            }
            GlobalType::Var(v) => {
                use std::fmt::Write;
                let idx = bound.iter().rev().position(|b| b == v);
                match idx {
                    Some(i) => {
                        let _ = write!(out, "V{i}");
                    }
                    None => {
                        let _ = write!(out, "F{v}");
                    }
                }
            }
            GlobalType::End => out.push('E'),
        }
    }
}

/// `well_annotated(C, G, R)`: no reliable role is crashed, every crash
/// annotation is covered by the crashed set, and no role is both active and
/// crashed.
pub fn well_annotated(crashed_set: &BTreeSet<Role>, g: &GlobalType, reliable: &BTreeSet<Role>) -> bool {
    let crashed = g.crashed_roles();
    let active = g.active_roles();
    crashed.is_disjoint(reliable)
        && crashed.is_subset(crashed_set)
        && active.is_disjoint(&crashed)
}

/// Errors from role removal.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum RemoveRoleError {
    #[error("role {0} is not active in the global type")]
    NotActive(Role),
    #[error("cannot remove sender {0}: transmission to {1} has no crash handling branch")]
    MissingCrashBranch(Role, Role),
}

/// Removal of a live role `G (-) r`: annotates the crashed role and prunes
/// interactions rendered meaningless by the crash.
///
/// Removing the sender of a transmission that carries a crash handling
/// branch leaves a pseudo-message en route committed to that branch, so the
/// receiver can still detect the crash. Removing the sender of a
/// transmission already en route retains the committed index: messages sent
/// before crashing stay deliverable.
pub fn remove_role(g: &GlobalType, role: &Role) -> Result<GlobalType, RemoveRoleError> {
    if !g.active_roles().contains(role) {
        return Err(RemoveRoleError::NotActive(role.clone()));
    }
    remove_inner(g, role)
}

fn remove_branches(branches: &[GBranch], role: &Role) -> Result<Vec<GBranch>, RemoveRoleError> {
    branches
        .iter()
        .map(|b| {
            Ok(GBranch {
                label: b.label.clone(),
                payload: b.payload.clone(),
                cont: remove_inner(&b.cont, role)?,
            })
        })
        .collect()
}

fn remove_inner(g: &GlobalType, role: &Role) -> Result<GlobalType, RemoveRoleError> {
    match g {
        GlobalType::Comm { sender, receiver, receiver_crashed: false, branches } => {
            if sender == role {
                match branches.iter().position(|b| b.label.is_crash()) {
                    Some(j) => Ok(GlobalType::Transit {
                        sender: sender.clone(),
                        sender_crashed: true,
                        receiver: receiver.clone(),
                        branches: remove_branches(branches, role)?,
                        committed: j,
                    }),
                    None => Err(RemoveRoleError::MissingCrashBranch(
                        sender.clone(),
                        receiver.clone(),
                    )),
                }
            } else if receiver == role {
                Ok(GlobalType::Comm {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    receiver_crashed: true,
                    branches: remove_branches(branches, role)?,
                })
            } else {
                Ok(GlobalType::Comm {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    receiver_crashed: false,
                    branches: remove_branches(branches, role)?,
                })
            }
        }
        GlobalType::Comm { sender, receiver, receiver_crashed: true, branches } => {
            if sender == role {
                // Both ends have now crashed; the prefix is meaningless and we
                // continue with the crash handling continuation.
                match branches.iter().position(|b| b.label.is_crash()) {
                    Some(j) => remove_inner(&branches[j].cont, role),
                    None => Err(RemoveRoleError::MissingCrashBranch(
                        sender.clone(),
                        receiver.clone(),
                    )),
                }
            } else {
                Ok(GlobalType::Comm {
                    sender: sender.clone(),
                    receiver: receiver.clone(),
                    receiver_crashed: true,
                    branches: remove_branches(branches, role)?,
                })
            }
        }
        GlobalType::Transit { sender, sender_crashed: false, receiver, branches, committed } => {
            if sender == role {
                Ok(GlobalType::Transit {
                    sender: sender.clone(),
                    sender_crashed: true,
                    receiver: receiver.clone(),
                    branches: remove_branches(branches, role)?,
                    committed: *committed,
                })
            } else if receiver == role {
                remove_inner(&branches[*committed].cont, role)
            } else {
                Ok(GlobalType::Transit {
                    sender: sender.clone(),
                    sender_crashed: false,
                    receiver: receiver.clone(),
                    branches: remove_branches(branches, role)?,
                    committed: *committed,
                })
            }
        }
        GlobalType::Transit { sender, sender_crashed: true, receiver, branches, committed } => {
            if receiver == role {
                remove_inner(&branches[*committed].cont, role)
            } else {
                Ok(GlobalType::Transit {
                    sender: sender.clone(),
                    sender_crashed: true,
                    receiver: receiver.clone(),
                    branches: remove_branches(branches, role)?,
                    committed: *committed,
                })
            }
        }
        GlobalType::Rec { var, body } => {
            let pruned = remove_inner(body, role)?;
            let keep = !GlobalType::Rec { var: var.clone(), body: Box::new(pruned.clone()) }
                .free_vars()
                .is_empty()
                || !pruned.active_roles().is_empty();
            if keep {
                Ok(GlobalType::Rec { var: var.clone(), body: Box::new(pruned) })
            } else {
                Ok(GlobalType::End)
            }
        }
        GlobalType::Var(v) => Ok(GlobalType::Var(v.clone())),
        GlobalType::End => Ok(GlobalType::End),
    }
}

impl fmt::Display for GlobalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn branch(b: &GBranch, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "{}", b.label)?;
            if let Some(p) = &b.payload {
                write!(f, "({p})")?;
            }
            if !matches!(b.cont, GlobalType::End) {
                write!(f, ".{}", b.cont)?;
            }
            Ok(())
        }
        match self {
            GlobalType::Comm { sender, receiver, receiver_crashed, branches } => {
                write!(f, "{sender}->{receiver}{}", if *receiver_crashed { "*" } else { "" })?;
                if branches.len() == 1 {
                    write!(f, ":")?;
                    branch(&branches[0], f)
                } else {
                    write!(f, "{{")?;
                    for (i, b) in branches.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        branch(b, f)?;
                    }
                    write!(f, "}}")
                }
            }
            GlobalType::Transit { sender, sender_crashed, receiver, branches, committed } => {
                write!(
                    f,
                    "{sender}{}~>{receiver}:{}",
                    if *sender_crashed { "*" } else { "" },
                    branches[*committed].label
                )?;
                write!(f, "{{")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    branch(b, f)?;
                }
                write!(f, "}}")
            }
            GlobalType::Rec { var, body } => write!(f, "mu {var}.{body}"),
            GlobalType::Var(v) => write!(f, "{v}"),
            GlobalType::End => write!(f, "end"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    /// The three-role logging protocol: L->I:trigger. C->I{read..., crash...}.
    pub(crate) fn simpler_logging() -> GlobalType {
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
                        Some(Sort::new("log")),
                        GlobalType::comm(
                            "I",
                            "C",
                            vec![GBranch::new("report", Some(Sort::new("log")), GlobalType::End)],
                        ),
                    )],
                ),
            )],
        );
        let crash_cont = GlobalType::comm(
            "I",
            "L",
            vec![GBranch::new("fatal", None, GlobalType::End)],
        );
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

    #[test]
    fn roles_of_end_is_empty() {
        assert!(GlobalType::End.active_roles().is_empty());
        assert!(GlobalType::End.crashed_roles().is_empty());
    }

    #[test]
    fn roles_of_simpler_logging() {
        let g = simpler_logging();
        let expected: BTreeSet<Role> = [r("L"), r("I"), r("C")].into_iter().collect();
        assert_eq!(g.active_roles(), expected);
        assert!(g.crashed_roles().is_empty());
    }

    #[test]
    fn crashed_receiver_annotation_counts() {
        let g = GlobalType::Comm {
            sender: r("p"),
            receiver: r("q"),
            receiver_crashed: true,
            branches: vec![GBranch::new("l", None, GlobalType::End)],
        };
        assert_eq!(g.crashed_roles(), [r("q")].into_iter().collect());
        assert_eq!(g.active_roles(), [r("p")].into_iter().collect());
    }

    #[test]
    fn crashed_transit_sender_does_not_count() {
        let g = GlobalType::Transit {
            sender: r("p"),
            sender_crashed: true,
            receiver: r("q"),
            branches: vec![GBranch::new("crash", None, GlobalType::End)],
            committed: 0,
        };
        assert!(g.crashed_roles().is_empty());
        assert_eq!(g.active_roles(), [r("q")].into_iter().collect());
    }

    #[test]
    fn unfold_of_end_is_identity() {
        assert_eq!(GlobalType::End.unfold_once(), GlobalType::End);
    }

    #[test]
    fn unfold_substitutes_binder() {
        let g = GlobalType::rec(
            "t",
            GlobalType::comm("p", "q", vec![GBranch::new("l", None, GlobalType::var("t"))]),
        );
        let unfolded = g.unfold_once();
        match &unfolded {
            GlobalType::Comm { branches, .. } => assert_eq!(branches[0].cont, g),
            other => panic!("expected transmission, got {other}"),
        }
    }

    #[test]
    fn remove_role_from_simpler_logging() {
        // Removing C commits the choice at C to the crash branch and
        // annotates C's reception of the report.
        let g = simpler_logging();
        let removed = remove_role(&g, &r("C")).unwrap();
        let expected_active: BTreeSet<Role> = [r("L"), r("I")].into_iter().collect();
        assert_eq!(removed.active_roles(), expected_active);
        assert_eq!(removed.crashed_roles(), [r("C")].into_iter().collect());
        match &removed {
            GlobalType::Comm { branches, .. } => match &branches[0].cont {
                GlobalType::Transit { sender, sender_crashed, branches, committed, .. } => {
                    assert_eq!(sender, &r("C"));
                    assert!(sender_crashed);
                    assert!(branches[*committed].label.is_crash());
                }
                other => panic!("expected transit after trigger, got {other}"),
            },
            other => panic!("expected trigger transmission, got {other}"),
        }
        let crashed_set: BTreeSet<Role> = [r("C")].into_iter().collect();
        let reliable: BTreeSet<Role> = [r("L"), r("I")].into_iter().collect();
        assert!(well_annotated(&crashed_set, &removed, &reliable));
        // WA2 fails when the crashed set does not cover the annotation.
        assert!(!well_annotated(&BTreeSet::new(), &removed, &reliable));
    }

    #[test]
    fn remove_role_not_active_is_error() {
        assert_eq!(
            remove_role(&GlobalType::End, &r("p")),
            Err(RemoveRoleError::NotActive(r("p")))
        );
    }

    #[test]
    fn remove_transit_receiver_takes_committed_branch() {
        let g = GlobalType::Transit {
            sender: r("p"),
            sender_crashed: false,
            receiver: r("q"),
            branches: vec![
                GBranch::new("a", None, GlobalType::comm("r", "s", vec![GBranch::new("x", None, GlobalType::End)])),
                GBranch::new(
                    "b",
                    None,
                    GlobalType::comm("r", "s", vec![GBranch::new("y", None, GlobalType::End)]),
                ),
            ],
            committed: 1,
        };
        let removed = remove_role(&g, &r("q")).unwrap();
        match removed {
            GlobalType::Comm { ref sender, ref receiver, receiver_crashed, ref branches } => {
                assert_eq!((sender, receiver, receiver_crashed), (&r("r"), &r("s"), false));
                assert_eq!(branches[0].label, Label::new("y"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn design_time_check() {
        assert!(simpler_logging().is_design_time());
        let removed = remove_role(&simpler_logging(), &r("C")).unwrap();
        assert!(!removed.is_design_time());
    }

    #[test]
    fn contractivity() {
        assert!(GlobalType::rec(
            "t",
            GlobalType::comm("p", "q", vec![GBranch::new("l", None, GlobalType::var("t"))])
        )
        .is_contractive());
        assert!(!GlobalType::rec("t", GlobalType::var("t")).is_contractive());
        assert!(!GlobalType::rec("t", GlobalType::rec("u", GlobalType::var("t"))).is_contractive());
    }
}
