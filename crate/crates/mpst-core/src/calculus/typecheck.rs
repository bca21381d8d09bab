//! Typing for processes, queues, and sessions.

use std::collections::{BTreeMap, BTreeSet};

use crate::calculus::{Expr, Process, SessQueue, Session, Value};
use crate::ident::{RecVar, Role, Sort};
use crate::local::{LBranch, LocalType};
use crate::semantics::{AnnotatedGlobal, Configuration};
use crate::verify::{check_association, AssociationFailure};

/// The variable context: payload variables with their sorts. Process
/// recursion variables type as themselves and need no entries.
pub type VarContext = BTreeMap<String, Sort>;

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("sort mismatch: expected {expected}, found {found}")]
    SortMismatch { expected: Sort, found: Sort },
    #[error("operator applied to sort {0}")]
    BadOperand(Sort),
    #[error("a process cannot send the crash pseudo-label")]
    CrashOutput,
    #[error("recursion {0} is not guarded by an input or an output")]
    UnguardedRecursion(String),
    #[error("conditional branches have incompatible types {0} and {1}")]
    BranchMismatch(String, String),
}

fn type_of_expr(theta: &VarContext, e: &Expr) -> Result<Sort, TypeError> {
    match e {
        Expr::Lit(v) => Ok(v.sort()),
        Expr::Var(x) => theta.get(x).cloned().ok_or_else(|| TypeError::UnboundVariable(x.clone())),
        Expr::Add(a, b) => {
            for side in [a, b] {
                let s = type_of_expr(theta, side)?;
                if s.as_str() != "Int" {
                    return Err(TypeError::BadOperand(s));
                }
            }
            Ok(Sort::new("Int"))
        }
        Expr::Lt(a, b) => {
            for side in [a, b] {
                let s = type_of_expr(theta, side)?;
                if s.as_str() != "Int" {
                    return Err(TypeError::BadOperand(s));
                }
            }
            Ok(Sort::new("Bool"))
        }
        Expr::Eq(a, b) => {
            let sa = type_of_expr(theta, a)?;
            let sb = type_of_expr(theta, b)?;
            if sa != sb {
                return Err(TypeError::SortMismatch { expected: sa, found: sb });
            }
            Ok(Sort::new("Bool"))
        }
        Expr::Not(a) => {
            let s = type_of_expr(theta, a)?;
            if s.as_str() != "Bool" {
                return Err(TypeError::BadOperand(s));
            }
            Ok(Sort::new("Bool"))
        }
    }
}

/// Synthesise the minimal local type of a process. Checking against an
/// expected type is subsumption: the minimal type must be a subtype of it.
pub fn typecheck_process(theta: &VarContext, p: &Process) -> Result<LocalType, TypeError> {
    let t = synth(theta, p)?;
    if !t.is_contractive() {
        return Err(TypeError::UnguardedRecursion(format!("{p}")));
    }
    Ok(t)
}

fn synth(theta: &VarContext, p: &Process) -> Result<LocalType, TypeError> {
    match p {
        Process::Inact => Ok(LocalType::End),
        Process::Crashed => Ok(LocalType::Stop),
        Process::Var(x) => Ok(LocalType::Var(RecVar::new(x))),
        Process::Rec { var, body } => {
            let t = synth(theta, body)?;
            let rec = LocalType::Rec { var: RecVar::new(var), body: Box::new(t) };
            if !rec.is_contractive() {
                return Err(TypeError::UnguardedRecursion(var.clone()));
            }
            Ok(rec)
        }
        Process::Output { peer, label, expr, cont } => {
            if label.is_crash() {
                return Err(TypeError::CrashOutput);
            }
            let payload = expr.as_ref().map(|e| type_of_expr(theta, e)).transpose()?;
            let cont = synth(theta, cont)?;
            Ok(LocalType::Internal {
                peer: peer.clone(),
                branches: vec![LBranch::new(label.clone(), payload, cont)],
            })
        }
        Process::ExtChoice { peer, branches } => {
            let mut out = Vec::new();
            for b in branches {
                let mut theta = theta.clone();
                let payload = b.binder.as_ref().map(|(x, s)| {
                    theta.insert(x.clone(), s.clone());
                    s.clone()
                });
                let body = synth(&theta, &b.body)?;
                out.push(LBranch::new(b.label.clone(), payload, body));
            }
            Ok(LocalType::External { peer: peer.clone(), branches: out })
        }
        Process::If { cond, then_p, else_p } => {
            let s = type_of_expr(theta, cond)?;
            if s.as_str() != "Bool" {
                return Err(TypeError::BadOperand(s));
            }
            let t1 = synth(theta, then_p)?;
            let t2 = synth(theta, else_p)?;
            // Both branches must agree (up to unfolding); the synthesis is
            // minimal-type based, so no join is attempted.
            if !crate::local::equirec_equal(&t1, &t2) {
                return Err(TypeError::BranchMismatch(t1.to_string(), t2.to_string()));
            }
            Ok(t1)
        }
    }
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum SessionTypeError {
    #[error("role {role}: {error}")]
    Process { role: Role, error: TypeError },
    #[error("association: {0}")]
    Association(AssociationFailure),
}

/// Type a session against an annotated global type: synthesise the typing
/// context from per-role minimal types and the queue environment from queue
/// contents, then require association (projections are matched with subtype
/// slack). A failure names the role or clause at fault.
pub fn typecheck_session(
    state: &AnnotatedGlobal,
    m: &Session,
    reliable: &BTreeSet<Role>,
) -> Result<(), SessionTypeError> {
    let m = crate::calculus::congruence_normalize(m);

    // Domain: whatever the session mentions plus whatever the global type
    // needs. Roles erased by congruence were inactive with empty queues.
    let mut domain: BTreeSet<Role> = m.entries.keys().cloned().collect();
    domain.extend(state.gtype.active_roles());
    domain.extend(state.crashed.iter().cloned());

    let mut ctx = BTreeMap::new();
    for role in &domain {
        let t = match m.entries.get(role) {
            Some((proc, _)) => typecheck_process(&Default::default(), proc)
                .map_err(|error| SessionTypeError::Process { role: role.clone(), error })?,
            None => LocalType::End,
        };
        ctx.insert(role.clone(), t);
    }

    let mut config = Configuration::with_empty_queues(ctx);
    for role in &domain {
        match m.entries.get(role) {
            Some((_, SessQueue::Unavailable)) => config.make_unavailable_into(role),
            Some((_, SessQueue::Msgs(msgs))) => {
                for (origin, label, value) in msgs {
                    if let Some(q) = config.queues.get_mut(&(origin.clone(), role.clone())) {
                        q.push(label.clone(), value.as_ref().map(Value::sort));
                    }
                }
            }
            None => {}
        }
    }

    check_association(state, &config, reliable)
        .map(|_| ())
        .map_err(SessionTypeError::Association)
}
