//! Projection of global types onto roles, with the full merge operator.
//!
//! Projection enforces the crash handling discipline: when projecting a
//! transmission whose sender is unreliable, the receiver's external choice
//! must contain a `crash` branch, and the sender's internal choice drops the
//! `crash` pseudo-label (it can never be sent).
//!
//! [`project_annotated`] additionally tracks channel annotations: every
//! transmission prefix of the source global type is numbered in pre-order,
//! annotations propagate verbatim through projection, and merging produces
//! set-annotations. Channel generation consumes these in [`crate::codegen`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::global::{GBranch, GlobalType};
use crate::ident::{Label, RecVar, Role, Sort};
use crate::local::{LBranch, LocalType};

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("receiver {receiver} of unreliable sender {sender} has no crash handling branch")]
    MissingCrashBranch { sender: Role, receiver: Role },
    #[error("merge undefined at path [{}]: {reason}", path_display(.path))]
    MergeUndefined { path: Vec<Label>, reason: String },
    #[error("projection onto {role} yields a non-contractive recursion")]
    NotContractive { role: Role },
    #[error("projection onto {role} yields an external choice with only the crash label")]
    SoleCrashExternal { role: Role },
}

fn path_display(path: &[Label]) -> String {
    path.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(".")
}

/// Project `g` onto `role` with respect to the reliable set.
pub fn project(
    g: &GlobalType,
    role: &Role,
    reliable: &BTreeSet<Role>,
) -> Result<LocalType, ProjectionError> {
    let t = go(g, role, reliable, &mut Vec::new())?;
    check_result(&t, role)?;
    Ok(t)
}

fn check_result(t: &LocalType, role: &Role) -> Result<(), ProjectionError> {
    if !t.is_contractive() {
        return Err(ProjectionError::NotContractive { role: role.clone() });
    }
    // Reject external choices whose only label is crash: such a type could
    // never be inhabited by a live endpoint.
    fn no_sole_crash(t: &LocalType) -> bool {
        match t {
            LocalType::External { branches, .. } => {
                !(branches.len() == 1 && branches[0].label.is_crash())
                    && branches.iter().all(|b| no_sole_crash(&b.cont))
            }
            LocalType::Internal { branches, .. } => branches.iter().all(|b| no_sole_crash(&b.cont)),
            LocalType::Rec { body, .. } => no_sole_crash(body),
            _ => true,
        }
    }
    if !no_sole_crash(t) {
        return Err(ProjectionError::SoleCrashExternal { role: role.clone() });
    }
    Ok(())
}

fn go(
    g: &GlobalType,
    role: &Role,
    reliable: &BTreeSet<Role>,
    path: &mut Vec<Label>,
) -> Result<LocalType, ProjectionError> {
    match g {
        GlobalType::Comm { sender, receiver, branches, .. } => {
            if role == sender {
                let mut out = Vec::new();
                for b in branches {
                    if b.label.is_crash() {
                        continue;
                    }
                    path.push(b.label.clone());
                    let cont = go(&b.cont, role, reliable, path)?;
                    path.pop();
                    out.push(LBranch::new(b.label.clone(), b.payload.clone(), cont));
                }
                Ok(LocalType::Internal { peer: receiver.clone(), branches: out })
            } else if role == receiver {
                if !reliable.contains(sender) && !branches.iter().any(|b| b.label.is_crash()) {
                    return Err(ProjectionError::MissingCrashBranch {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                    });
                }
                let mut out = Vec::new();
                for b in branches {
                    path.push(b.label.clone());
                    let cont = go(&b.cont, role, reliable, path)?;
                    path.pop();
                    out.push(LBranch::new(b.label.clone(), b.payload.clone(), cont));
                }
                Ok(LocalType::External { peer: sender.clone(), branches: out })
            } else {
                merge_branches(g, branches, role, reliable, path)
            }
        }
        GlobalType::Transit { sender, receiver, branches, committed, .. } => {
            if role == sender {
                go(&branches[*committed].cont, role, reliable, path)
            } else if role == receiver {
                if !reliable.contains(sender) && !branches.iter().any(|b| b.label.is_crash()) {
                    return Err(ProjectionError::MissingCrashBranch {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                    });
                }
                let mut out = Vec::new();
                for b in branches {
                    path.push(b.label.clone());
                    let cont = go(&b.cont, role, reliable, path)?;
                    path.pop();
                    out.push(LBranch::new(b.label.clone(), b.payload.clone(), cont));
                }
                Ok(LocalType::External { peer: sender.clone(), branches: out })
            } else {
                merge_branches(g, branches, role, reliable, path)
            }
        }
        GlobalType::Rec { var, body } => {
            let occurs = body.active_roles().contains(role) || body.crashed_roles().contains(role);
            if occurs || !g.free_vars().is_empty() {
                let projected = go(body, role, reliable, path)?;
                Ok(LocalType::Rec { var: var.clone(), body: Box::new(projected) })
            } else {
                Ok(LocalType::End)
            }
        }
        GlobalType::Var(v) => Ok(LocalType::Var(v.clone())),
        GlobalType::End => Ok(LocalType::End),
    }
}

fn merge_branches(
    _g: &GlobalType,
    branches: &[GBranch],
    role: &Role,
    reliable: &BTreeSet<Role>,
    path: &mut Vec<Label>,
) -> Result<LocalType, ProjectionError> {
    let mut acc: Option<LocalType> = None;
    for b in branches {
        path.push(b.label.clone());
        let t = go(&b.cont, role, reliable, path)?;
        path.pop();
        acc = Some(match acc {
            None => t,
            Some(prev) => merge_at(&prev, &t, path)?,
        });
    }
    Ok(acc.expect("transmissions have at least one branch"))
}

/// Full merge of two local types.
pub fn merge(a: &LocalType, b: &LocalType) -> Result<LocalType, ProjectionError> {
    merge_at(a, b, &[])
}

fn merge_at(a: &LocalType, b: &LocalType, path: &[Label]) -> Result<LocalType, ProjectionError> {
    let undefined = |reason: String| ProjectionError::MergeUndefined {
        path: path.to_vec(),
        reason,
    };
    match (a, b) {
        (LocalType::End, LocalType::End) => Ok(LocalType::End),
        (LocalType::Var(v1), LocalType::Var(v2)) if v1 == v2 => Ok(LocalType::Var(v1.clone())),
        (LocalType::Rec { var: v1, body: b1 }, LocalType::Rec { var: v2, body: b2 }) => {
            let b2 = if v1 == v2 { (**b2).clone() } else { b2.substitute(v2, &LocalType::var(v1.clone())) };
            Ok(LocalType::Rec {
                var: v1.clone(),
                body: Box::new(merge_at(b1, &b2, path)?),
            })
        }
        (
            LocalType::External { peer: p1, branches: bs1 },
            LocalType::External { peer: p2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return Err(undefined(format!("external choices from different peers {p1} and {p2}")));
            }
            let mut out: Vec<LBranch> = Vec::new();
            for b1 in bs1 {
                match bs2.iter().find(|b2| b2.label == b1.label) {
                    Some(b2) => {
                        if b1.payload != b2.payload {
                            return Err(undefined(format!(
                                "label {} carries different payload sorts",
                                b1.label
                            )));
                        }
                        let mut path2 = path.to_vec();
                        path2.push(b1.label.clone());
                        out.push(LBranch::new(
                            b1.label.clone(),
                            b1.payload.clone(),
                            merge_at(&b1.cont, &b2.cont, &path2)?,
                        ));
                    }
                    None => out.push(b1.clone()),
                }
            }
            for b2 in bs2 {
                if !bs1.iter().any(|b1| b1.label == b2.label) {
                    out.push(b2.clone());
                }
            }
            Ok(LocalType::External { peer: p1.clone(), branches: out })
        }
        (
            LocalType::Internal { peer: p1, branches: bs1 },
            LocalType::Internal { peer: p2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return Err(undefined(format!("internal choices towards different peers {p1} and {p2}")));
            }
            let labels1: BTreeSet<_> = bs1.iter().map(|b| (&b.label, &b.payload)).collect();
            let labels2: BTreeSet<_> = bs2.iter().map(|b| (&b.label, &b.payload)).collect();
            if labels1 != labels2 {
                return Err(undefined("internal choices with different label sets".into()));
            }
            let mut out = Vec::new();
            for b1 in bs1 {
                let b2 = bs2.iter().find(|b2| b2.label == b1.label).expect("equal label sets");
                let mut path2 = path.to_vec();
                path2.push(b1.label.clone());
                out.push(LBranch::new(
                    b1.label.clone(),
                    b1.payload.clone(),
                    merge_at(&b1.cont, &b2.cont, &path2)?,
                ));
            }
            Ok(LocalType::Internal { peer: p1.clone(), branches: out })
        }
        (a, b) => Err(undefined(format!("incompatible shapes {a} and {b}"))),
    }
}

// ---------------------------------------------------------------------------
// Annotated projection
// ---------------------------------------------------------------------------

/// A channel annotation: a single prefix identifier, or the set of
/// identifiers collapsed by merging.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ann {
    Atom(u64),
    Set(BTreeSet<u64>),
}

impl Ann {
    pub fn merge(&self, other: &Ann) -> Ann {
        let mut set: BTreeSet<u64> = self.members();
        set.extend(other.members());
        if set.len() == 1 {
            Ann::Atom(set.into_iter().next().unwrap())
        } else {
            Ann::Set(set)
        }
    }

    pub fn members(&self) -> BTreeSet<u64> {
        match self {
            Ann::Atom(n) => [*n].into_iter().collect(),
            Ann::Set(s) => s.clone(),
        }
    }
}

impl fmt::Display for Ann {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ann::Atom(n) => write!(f, "{n}"),
            Ann::Set(s) => {
                write!(f, "{{")?;
                for (i, n) in s.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ABranch {
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload: Option<Sort>,
    pub cont: AnnLocalType,
}

/// A local type whose choice nodes carry channel annotations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnLocalType {
    Internal { peer: Role, ann: Ann, branches: Vec<ABranch> },
    External { peer: Role, ann: Ann, branches: Vec<ABranch> },
    Rec { var: RecVar, body: Box<AnnLocalType> },
    Var(RecVar),
    End,
}

impl AnnLocalType {
    /// Drop annotations, recovering a plain local type.
    pub fn erase(&self) -> LocalType {
        match self {
            AnnLocalType::Internal { peer, branches, .. } => LocalType::Internal {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| LBranch::new(b.label.clone(), b.payload.clone(), b.cont.erase()))
                    .collect(),
            },
            AnnLocalType::External { peer, branches, .. } => LocalType::External {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| LBranch::new(b.label.clone(), b.payload.clone(), b.cont.erase()))
                    .collect(),
            },
            AnnLocalType::Rec { var, body } => LocalType::Rec { var: var.clone(), body: Box::new(body.erase()) },
            AnnLocalType::Var(v) => LocalType::Var(v.clone()),
            AnnLocalType::End => LocalType::End,
        }
    }

    pub fn annotations(&self) -> BTreeSet<Ann> {
        let mut out = BTreeSet::new();
        self.collect_annotations(&mut out);
        out
    }

    fn collect_annotations(&self, out: &mut BTreeSet<Ann>) {
        match self {
            AnnLocalType::Internal { ann, branches, .. }
            | AnnLocalType::External { ann, branches, .. } => {
                out.insert(ann.clone());
                for b in branches {
                    b.cont.collect_annotations(out);
                }
            }
            AnnLocalType::Rec { body, .. } => body.collect_annotations(out),
            AnnLocalType::Var(_) | AnnLocalType::End => {}
        }
    }
}

/// Project with channel annotations. Prefixes of the global type are
/// numbered in pre-order (source branch order); merged nodes receive the
/// union of the annotations they collapse.
pub fn project_annotated(
    g: &GlobalType,
    role: &Role,
    reliable: &BTreeSet<Role>,
) -> Result<AnnLocalType, ProjectionError> {
    let numbered = number_prefixes(g);
    go_ann(&numbered, role, reliable)
}

/// A numbering of every transmission prefix, attached structurally.
struct NumberedGlobal {
    id: Option<u64>,
    node: NumberedNode,
}

enum NumberedNode {
    Comm {
        sender: Role,
        receiver: Role,
        branches: Vec<(Label, Option<Sort>, NumberedGlobal)>,
    },
    Transit {
        sender: Role,
        receiver: Role,
        branches: Vec<(Label, Option<Sort>, NumberedGlobal)>,
        committed: usize,
    },
    Rec {
        var: RecVar,
        body: Box<NumberedGlobal>,
    },
    Var(RecVar),
    End,
}

fn number_prefixes(g: &GlobalType) -> NumberedGlobal {
    fn go(g: &GlobalType, next: &mut u64) -> NumberedGlobal {
        match g {
            GlobalType::Comm { sender, receiver, branches, .. } => {
                let id = *next;
                *next += 1;
                NumberedGlobal {
                    id: Some(id),
                    node: NumberedNode::Comm {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                        branches: branches
                            .iter()
                            .map(|b| (b.label.clone(), b.payload.clone(), go(&b.cont, next)))
                            .collect(),
                    },
                }
            }
            GlobalType::Transit { sender, receiver, branches, committed, .. } => {
                let id = *next;
                *next += 1;
                NumberedGlobal {
                    id: Some(id),
                    node: NumberedNode::Transit {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                        branches: branches
                            .iter()
                            .map(|b| (b.label.clone(), b.payload.clone(), go(&b.cont, next)))
                            .collect(),
                        committed: *committed,
                    },
                }
            }
            GlobalType::Rec { var, body } => NumberedGlobal {
                id: None,
                node: NumberedNode::Rec { var: var.clone(), body: Box::new(go(body, next)) },
            },
            GlobalType::Var(v) => NumberedGlobal { id: None, node: NumberedNode::Var(v.clone()) },
            GlobalType::End => NumberedGlobal { id: None, node: NumberedNode::End },
        }
    }
    go(g, &mut 0)
}

fn roles_of_numbered(g: &NumberedGlobal, active: &mut BTreeSet<Role>) {
    match &g.node {
        NumberedNode::Comm { sender, receiver, branches } => {
            active.insert(sender.clone());
            active.insert(receiver.clone());
            for (_, _, cont) in branches {
                roles_of_numbered(cont, active);
            }
        }
        NumberedNode::Transit { receiver, branches, .. } => {
            active.insert(receiver.clone());
            for (_, _, cont) in branches {
                roles_of_numbered(cont, active);
            }
        }
        NumberedNode::Rec { body, .. } => roles_of_numbered(body, active),
        NumberedNode::Var(_) | NumberedNode::End => {}
    }
}

fn free_vars_numbered(g: &NumberedGlobal, bound: &mut Vec<RecVar>, out: &mut BTreeSet<RecVar>) {
    match &g.node {
        NumberedNode::Comm { branches, .. } | NumberedNode::Transit { branches, .. } => {
            for (_, _, cont) in branches {
                free_vars_numbered(cont, bound, out);
            }
        }
        NumberedNode::Rec { var, body } => {
            bound.push(var.clone());
            free_vars_numbered(body, bound, out);
            bound.pop();
        }
        NumberedNode::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        NumberedNode::End => {}
    }
}

fn go_ann(
    g: &NumberedGlobal,
    role: &Role,
    reliable: &BTreeSet<Role>,
) -> Result<AnnLocalType, ProjectionError> {
    match &g.node {
        NumberedNode::Comm { sender, receiver, branches } => {
            let ann = Ann::Atom(g.id.expect("prefixes are numbered"));
            if role == sender {
                let mut out = Vec::new();
                for (label, payload, cont) in branches {
                    if label.is_crash() {
                        continue;
                    }
                    out.push(ABranch {
                        label: label.clone(),
                        payload: payload.clone(),
                        cont: go_ann(cont, role, reliable)?,
                    });
                }
                Ok(AnnLocalType::Internal { peer: receiver.clone(), ann, branches: out })
            } else if role == receiver {
                if !reliable.contains(sender) && !branches.iter().any(|(l, _, _)| l.is_crash()) {
                    return Err(ProjectionError::MissingCrashBranch {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                    });
                }
                let mut out = Vec::new();
                for (label, payload, cont) in branches {
                    out.push(ABranch {
                        label: label.clone(),
                        payload: payload.clone(),
                        cont: go_ann(cont, role, reliable)?,
                    });
                }
                Ok(AnnLocalType::External { peer: sender.clone(), ann, branches: out })
            } else {
                let mut acc: Option<AnnLocalType> = None;
                for (_, _, cont) in branches {
                    let t = go_ann(cont, role, reliable)?;
                    acc = Some(match acc {
                        None => t,
                        Some(prev) => merge_ann(&prev, &t)?,
                    });
                }
                Ok(acc.expect("non-empty branches"))
            }
        }
        NumberedNode::Transit { sender, receiver, branches, committed } => {
            let ann = Ann::Atom(g.id.expect("prefixes are numbered"));
            if role == sender {
                go_ann(&branches[*committed].2, role, reliable)
            } else if role == receiver {
                if !reliable.contains(sender) && !branches.iter().any(|(l, _, _)| l.is_crash()) {
                    return Err(ProjectionError::MissingCrashBranch {
                        sender: sender.clone(),
                        receiver: receiver.clone(),
                    });
                }
                let mut out = Vec::new();
                for (label, payload, cont) in branches {
                    out.push(ABranch {
                        label: label.clone(),
                        payload: payload.clone(),
                        cont: go_ann(cont, role, reliable)?,
                    });
                }
                Ok(AnnLocalType::External { peer: sender.clone(), ann, branches: out })
            } else {
                let mut acc: Option<AnnLocalType> = None;
                for (_, _, cont) in branches {
                    let t = go_ann(cont, role, reliable)?;
                    acc = Some(match acc {
                        None => t,
                        Some(prev) => merge_ann(&prev, &t)?,
                    });
                }
                Ok(acc.expect("non-empty branches"))
            }
        }
        NumberedNode::Rec { var, body } => {
            let mut active = BTreeSet::new();
            roles_of_numbered(body, &mut active);
            let mut fv = BTreeSet::new();
            free_vars_numbered(g, &mut Vec::new(), &mut fv);
            if active.contains(role) || !fv.is_empty() {
                Ok(AnnLocalType::Rec {
                    var: var.clone(),
                    body: Box::new(go_ann(body, role, reliable)?),
                })
            } else {
                Ok(AnnLocalType::End)
            }
        }
        NumberedNode::Var(v) => Ok(AnnLocalType::Var(v.clone())),
        NumberedNode::End => Ok(AnnLocalType::End),
    }
}

fn merge_ann(a: &AnnLocalType, b: &AnnLocalType) -> Result<AnnLocalType, ProjectionError> {
    let undefined = |reason: String| ProjectionError::MergeUndefined { path: Vec::new(), reason };
    match (a, b) {
        (AnnLocalType::End, AnnLocalType::End) => Ok(AnnLocalType::End),
        (AnnLocalType::Var(v1), AnnLocalType::Var(v2)) if v1 == v2 => {
            Ok(AnnLocalType::Var(v1.clone()))
        }
        (AnnLocalType::Rec { var: v1, body: b1 }, AnnLocalType::Rec { var: v2, body: b2 })
            if v1 == v2 =>
        {
            Ok(AnnLocalType::Rec { var: v1.clone(), body: Box::new(merge_ann(b1, b2)?) })
        }
        (
            AnnLocalType::External { peer: p1, ann: a1, branches: bs1 },
            AnnLocalType::External { peer: p2, ann: a2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return Err(undefined(format!("external choices from different peers {p1} and {p2}")));
            }
            let mut out: Vec<ABranch> = Vec::new();
            for b1 in bs1 {
                match bs2.iter().find(|b2| b2.label == b1.label) {
                    Some(b2) => {
                        if b1.payload != b2.payload {
                            return Err(undefined(format!(
                                "label {} carries different payload sorts",
                                b1.label
                            )));
                        }
                        out.push(ABranch {
                            label: b1.label.clone(),
                            payload: b1.payload.clone(),
                            cont: merge_ann(&b1.cont, &b2.cont)?,
                        });
                    }
                    None => out.push(b1.clone()),
                }
            }
            for b2 in bs2 {
                if !bs1.iter().any(|b1| b1.label == b2.label) {
                    out.push(b2.clone());
                }
            }
            Ok(AnnLocalType::External { peer: p1.clone(), ann: a1.merge(a2), branches: out })
        }
        (
            AnnLocalType::Internal { peer: p1, ann: a1, branches: bs1 },
            AnnLocalType::Internal { peer: p2, ann: a2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return Err(undefined(format!("internal choices towards different peers {p1} and {p2}")));
            }
            let labels1: BTreeSet<_> = bs1.iter().map(|b| (&b.label, &b.payload)).collect();
            let labels2: BTreeSet<_> = bs2.iter().map(|b| (&b.label, &b.payload)).collect();
            if labels1 != labels2 {
                return Err(undefined("internal choices with different label sets".into()));
            }
            let mut out = Vec::new();
            for b1 in bs1 {
                let b2 = bs2.iter().find(|b2| b2.label == b1.label).expect("equal label sets");
                out.push(ABranch {
                    label: b1.label.clone(),
                    payload: b1.payload.clone(),
                    cont: merge_ann(&b1.cont, &b2.cont)?,
                });
            }
            Ok(AnnLocalType::Internal { peer: p1.clone(), ann: a1.merge(a2), branches: out })
        }
        (a, b) => Err(undefined(format!("incompatible shapes {a:?} and {b:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(roles: &[&str]) -> BTreeSet<Role> {
        roles.iter().map(|r| Role::new(r)).collect()
    }

    /// G of the overview: L->I:trigger. C->I{read..., crash. I->L:fatal.end}
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

    #[test]
    fn project_end_is_end() {
        assert_eq!(
            project(&GlobalType::End, &Role::new("p"), &BTreeSet::new()).unwrap(),
            LocalType::End
        );
    }

    #[test]
    fn simpler_logging_projections() {
        let g = simpler_logging();
        let reliable = rel(&["L", "I"]);
        let log = Some(Sort::new("log"));

        // T_I: receives a trigger, then expects read or detects C's crash.
        let t_i = project(&g, &Role::new("I"), &reliable).unwrap();
        let expected_i = LocalType::recv(
            "L",
            "trigger",
            None,
            LocalType::external(
                "C",
                vec![
                    LBranch::new(
                        "read",
                        None,
                        LocalType::send(
                            "L",
                            "read",
                            None,
                            LocalType::recv(
                                "L",
                                "report",
                                log.clone(),
                                LocalType::send("C", "report", log.clone(), LocalType::End),
                            ),
                        ),
                    ),
                    LBranch::new(
                        "crash",
                        None,
                        LocalType::send("L", "fatal", None, LocalType::End),
                    ),
                ],
            ),
        );
        assert_eq!(t_i, expected_i);

        // T_C: the crash branch disappears from C's own selection.
        let t_c = project(&g, &Role::new("C"), &reliable).unwrap();
        let expected_c = LocalType::send(
            "I",
            "read",
            None,
            LocalType::recv("I", "report", log.clone(), LocalType::End),
        );
        assert_eq!(t_c, expected_c);

        // T_L: full merge unions L's views of the two branches.
        let t_l = project(&g, &Role::new("L"), &reliable).unwrap();
        let expected_l = LocalType::send(
            "I",
            "trigger",
            None,
            LocalType::external(
                "I",
                vec![
                    LBranch::new(
                        "read",
                        None,
                        LocalType::send("I", "report", log.clone(), LocalType::End),
                    ),
                    LBranch::new("fatal", None, LocalType::End),
                ],
            ),
        );
        assert_eq!(t_l, expected_l);
    }

    #[test]
    fn missing_crash_branch_detected() {
        // p unreliable sends to q without a crash handling branch.
        let g = GlobalType::comm("p", "q", vec![GBranch::new("l", None, GlobalType::End)]);
        let err = project(&g, &Role::new("q"), &BTreeSet::new()).unwrap_err();
        assert!(matches!(err, ProjectionError::MissingCrashBranch { .. }));
        // With p reliable the projection is fine.
        assert!(project(&g, &Role::new("q"), &rel(&["p"])).is_ok());
    }

    #[test]
    fn merge_unions_external_choices() {
        let a = LocalType::recv("p", "x", None, LocalType::End);
        let b = LocalType::recv("p", "y", None, LocalType::End);
        let merged = merge(&a, &b).unwrap();
        assert_eq!(
            merged,
            LocalType::external(
                "p",
                vec![
                    LBranch::new("x", None, LocalType::End),
                    LBranch::new("y", None, LocalType::End),
                ]
            )
        );
    }

    #[test]
    fn merge_rejects_internal_label_mismatch() {
        let a = LocalType::send("p", "x", None, LocalType::End);
        let b = LocalType::send("p", "y", None, LocalType::End);
        assert!(matches!(merge(&a, &b), Err(ProjectionError::MergeUndefined { .. })));
    }

    #[test]
    fn merge_is_idempotent_on_projections() {
        let g = simpler_logging();
        let reliable = rel(&["L", "I"]);
        for role in ["C", "L", "I"] {
            let t = project(&g, &Role::new(role), &reliable).unwrap();
            assert_eq!(merge(&t, &t).unwrap(), t);
        }
    }

    #[test]
    fn merge_failure_reports_path() {
        // Conflict is nested one label deep.
        let a = LocalType::recv("p", "x", None, LocalType::send("q", "u", None, LocalType::End));
        let b = LocalType::recv("p", "x", None, LocalType::send("q", "v", None, LocalType::End));
        match merge(&a, &b) {
            Err(ProjectionError::MergeUndefined { path, .. }) => {
                assert_eq!(path, vec![Label::new("x")]);
            }
            other => panic!("expected merge failure, got {other:?}"),
        }
    }

    /// Appendix-style channel example:
    /// p->q@0{v. p->r@1:x.end, w. p->r@2:y.end}
    fn channel_example() -> GlobalType {
        GlobalType::comm(
            "p",
            "q",
            vec![
                GBranch::new(
                    "v",
                    None,
                    GlobalType::comm("p", "r", vec![GBranch::new("x", None, GlobalType::End)]),
                ),
                GBranch::new(
                    "w",
                    None,
                    GlobalType::comm("p", "r", vec![GBranch::new("y", None, GlobalType::End)]),
                ),
            ],
        )
    }

    #[test]
    fn annotated_projection_merges_annotations() {
        let g = channel_example();
        let reliable = rel(&["p", "q", "r"]);
        let t_r = project_annotated(&g, &Role::new("r"), &reliable).unwrap();
        match &t_r {
            AnnLocalType::External { ann, branches, .. } => {
                assert_eq!(ann, &Ann::Set([1, 2].into_iter().collect()));
                assert_eq!(branches.len(), 2);
            }
            other => panic!("expected external choice, got {other:?}"),
        }
        let t_p = project_annotated(&g, &Role::new("p"), &reliable).unwrap();
        match &t_p {
            AnnLocalType::Internal { ann, branches, .. } => {
                assert_eq!(ann, &Ann::Atom(0));
                match &branches[0].cont {
                    AnnLocalType::Internal { ann, .. } => assert_eq!(ann, &Ann::Atom(1)),
                    other => panic!("unexpected {other:?}"),
                }
                match &branches[1].cont {
                    AnnLocalType::Internal { ann, .. } => assert_eq!(ann, &Ann::Atom(2)),
                    other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("expected internal choice, got {other:?}"),
        }
    }

    #[test]
    fn annotated_projection_single_interaction() {
        let g = GlobalType::comm("A", "B", vec![GBranch::new("hi", None, GlobalType::End)]);
        let reliable = rel(&["A", "B"]);
        for role in ["A", "B"] {
            let t = project_annotated(&g, &Role::new(role), &reliable).unwrap();
            let ann = t.annotations();
            assert_eq!(ann, [Ann::Atom(0)].into_iter().collect());
        }
    }

    #[test]
    fn erasure_matches_plain_projection() {
        let g = simpler_logging();
        let reliable = rel(&["L", "I"]);
        for role in ["C", "L", "I"] {
            let plain = project(&g, &Role::new(role), &reliable).unwrap();
            let ann = project_annotated(&g, &Role::new(role), &reliable).unwrap();
            assert!(crate::local::equirec_equal(&plain, &ann.erase()));
        }
    }

    #[test]
    fn simple_logger_annotations() {
        // mu t0. u->l@0{write.t0, read. l->u@1:report.t0, crash.end}
        let g = GlobalType::rec(
            "t0",
            GlobalType::comm(
                "u",
                "l",
                vec![
                    GBranch::new("write", Some(Sort::new("String")), GlobalType::var("t0")),
                    GBranch::new(
                        "read",
                        None,
                        GlobalType::comm(
                            "l",
                            "u",
                            vec![GBranch::new("report", Some(Sort::new("Log")), GlobalType::var("t0"))],
                        ),
                    ),
                    GBranch::new("crash", None, GlobalType::End),
                ],
            ),
        );
        let reliable = rel(&["l"]);
        let t_u = project_annotated(&g, &Role::new("u"), &reliable).unwrap();
        assert_eq!(
            t_u.annotations(),
            [Ann::Atom(0), Ann::Atom(1)].into_iter().collect()
        );
        let t_l = project_annotated(&g, &Role::new("l"), &reliable).unwrap();
        assert_eq!(
            t_l.annotations(),
            [Ann::Atom(0), Ann::Atom(1)].into_iter().collect()
        );
    }
}
