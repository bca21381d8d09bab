//! Local types: a single role's view of a protocol.

use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ident::{Label, RecVar, Role, Sort};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LBranch {
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload: Option<Sort>,
    pub cont: LocalType,
}

impl LBranch {
    pub fn new(label: impl Into<Label>, payload: Option<Sort>, cont: LocalType) -> Self {
        LBranch { label: label.into(), payload, cont }
    }
}

/// A local type. `Internal` is a selection towards `peer` (the crash label
/// never occurs there: a crash pseudo-message cannot be sent), `External` a
/// branching on messages from `peer`, possibly including a `crash` handling
/// branch. `Stop` is the runtime type of a crashed endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalType {
    Internal { peer: Role, branches: Vec<LBranch> },
    External { peer: Role, branches: Vec<LBranch> },
    Rec { var: RecVar, body: Box<LocalType> },
    Var(RecVar),
    End,
    Stop,
}

impl LocalType {
    pub fn internal(peer: impl Into<Role>, branches: Vec<LBranch>) -> Self {
        LocalType::Internal { peer: peer.into(), branches }
    }

    pub fn external(peer: impl Into<Role>, branches: Vec<LBranch>) -> Self {
        LocalType::External { peer: peer.into(), branches }
    }

    /// Single-branch selection `peer (+) label(payload). cont`.
    pub fn send(peer: impl Into<Role>, label: impl Into<Label>, payload: Option<Sort>, cont: LocalType) -> Self {
        LocalType::internal(peer, vec![LBranch::new(label, payload, cont)])
    }

    /// Single-branch reception `peer & label(payload). cont`.
    pub fn recv(peer: impl Into<Role>, label: impl Into<Label>, payload: Option<Sort>, cont: LocalType) -> Self {
        LocalType::external(peer, vec![LBranch::new(label, payload, cont)])
    }

    pub fn rec(var: impl Into<RecVar>, body: LocalType) -> Self {
        LocalType::Rec { var: var.into(), body: Box::new(body) }
    }

    pub fn var(var: impl Into<RecVar>) -> Self {
        LocalType::Var(var.into())
    }

    pub fn branches(&self) -> Option<&[LBranch]> {
        match self {
            LocalType::Internal { branches, .. } | LocalType::External { branches, .. } => {
                Some(branches)
            }
            _ => None,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<RecVar> {
        fn go(t: &LocalType, bound: &mut Vec<RecVar>, out: &mut BTreeSet<RecVar>) {
            match t {
                LocalType::Internal { branches, .. } | LocalType::External { branches, .. } => {
                    for b in branches {
                        go(&b.cont, bound, out);
                    }
                }
                LocalType::Rec { var, body } => {
                    bound.push(var.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                LocalType::Var(v) => {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
                LocalType::End | LocalType::Stop => {}
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn is_contractive(&self) -> bool {
        fn go(t: &LocalType, pending: &mut Vec<RecVar>) -> bool {
            match t {
                LocalType::Internal { branches, .. } | LocalType::External { branches, .. } => {
                    branches.iter().all(|b| go(&b.cont, &mut Vec::new()))
                }
                LocalType::Rec { var, body } => {
                    pending.push(var.clone());
                    let ok = go(body, pending);
                    pending.pop();
                    ok
                }
                LocalType::Var(v) => !pending.contains(v),
                LocalType::End | LocalType::Stop => true,
            }
        }
        go(self, &mut Vec::new())
    }

    pub fn substitute(&self, var: &RecVar, with: &LocalType) -> LocalType {
        match self {
            LocalType::Internal { peer, branches } => LocalType::Internal {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| LBranch {
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                        cont: b.cont.substitute(var, with),
                    })
                    .collect(),
            },
            LocalType::External { peer, branches } => LocalType::External {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| LBranch {
                        label: b.label.clone(),
                        payload: b.payload.clone(),
                        cont: b.cont.substitute(var, with),
                    })
                    .collect(),
            },
            LocalType::Rec { var: v, body } => {
                if v == var {
                    self.clone()
                } else {
                    LocalType::Rec { var: v.clone(), body: Box::new(body.substitute(var, with)) }
                }
            }
            LocalType::Var(v) => {
                if v == var {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            LocalType::End => LocalType::End,
            LocalType::Stop => LocalType::Stop,
        }
    }

    pub fn unfold_once(&self) -> LocalType {
        match self {
            LocalType::Rec { var, body } => body.substitute(var, self),
            _ => self.clone(),
        }
    }

    pub fn unfold_head(&self) -> LocalType {
        let mut t = self.clone();
        while matches!(t, LocalType::Rec { .. }) {
            t = t.unfold_once();
        }
        t
    }

    /// Canonical key with de Bruijn numbered binders and label-sorted
    /// branches; name-independent, so suitable for visited sets and
    /// assumption sets.
    pub fn canon_key(&self) -> String {
        let mut s = String::new();
        self.write_canon(&mut Vec::new(), &mut s);
        s
    }

    fn write_canon(&self, bound: &mut Vec<RecVar>, out: &mut String) {
        use std::fmt::Write;
        match self {
            LocalType::Internal { peer, branches } | LocalType::External { peer, branches } => {
                let tag = if matches!(self, LocalType::Internal { .. }) { 'I' } else { 'X' };
                let _ = write!(out, "{tag}{peer}(");
                let mut sorted: Vec<&LBranch> = branches.iter().collect();
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
            LocalType::Rec { var, body } => {
                out.push('R');
                bound.push(var.clone());
                body.write_canon(bound, out);
                bound.pop();
            }
            LocalType::Var(v) => {
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
            LocalType::End => out.push('E'),
            LocalType::Stop => out.push('S'),
        }
    }
}

/// Equi-recursive equality: `a` and `b` generate the same (possibly
/// infinite) tree. Decided with the usual assumption-set construction over
/// head-unfolded pairs; both types must be closed and contractive.
pub fn equirec_equal(a: &LocalType, b: &LocalType) -> bool {
    fn go(a: &LocalType, b: &LocalType, assumed: &mut HashSet<(String, String)>) -> bool {
        let a = a.unfold_head();
        let b = b.unfold_head();
        let key = (a.canon_key(), b.canon_key());
        if key.0 == key.1 {
            return true;
        }
        if !assumed.insert(key) {
            return true;
        }
        match (&a, &b) {
            (LocalType::End, LocalType::End) | (LocalType::Stop, LocalType::Stop) => true,
            (
                LocalType::Internal { peer: p1, branches: bs1 },
                LocalType::Internal { peer: p2, branches: bs2 },
            )
            | (
                LocalType::External { peer: p1, branches: bs1 },
                LocalType::External { peer: p2, branches: bs2 },
            ) => {
                p1 == p2
                    && bs1.len() == bs2.len()
                    && bs1.iter().all(|b1| {
                        bs2.iter().any(|b2| {
                            b1.label == b2.label
                                && b1.payload == b2.payload
                                && go(&b1.cont, &b2.cont, assumed)
                        })
                    })
            }
            _ => false,
        }
    }
    go(a, b, &mut HashSet::new())
}

impl fmt::Display for LocalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn branch(b: &LBranch, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "{}", b.label)?;
            if let Some(p) = &b.payload {
                write!(f, "({p})")?;
            }
            if !matches!(b.cont, LocalType::End) {
                write!(f, ".{}", b.cont)?;
            }
            Ok(())
        }
        match self {
            LocalType::Internal { peer, branches } | LocalType::External { peer, branches } => {
                let op = if matches!(self, LocalType::Internal { .. }) { "(+)" } else { "&" };
                write!(f, "{peer}{op}")?;
                if branches.len() == 1 {
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
            LocalType::Rec { var, body } => write!(f, "mu {var}.{body}"),
            LocalType::Var(v) => write!(f, "{v}"),
            LocalType::End => write!(f, "end"),
            LocalType::Stop => write!(f, "stop"),
        }
    }
}
