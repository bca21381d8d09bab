//! The asynchronous session calculus with crash-stop failures.
//!
//! Sessions pair a process with an incoming queue per role. Processes are
//! external choices (with optional crash handling branches), outputs,
//! conditionals, recursion, the inactive process, and the crashed process.
//! Reduction is parameterised by the set of reliable roles; an active
//! process at an unreliable role may crash at any time, losing its queue.

mod congruence;
mod fuzz;
mod procgen;
mod reduction;
mod typecheck;

pub use congruence::congruence_normalize;
pub use fuzz::{initial_session, subject_reduction_fuzz, FuzzOutcome, FuzzParams};
pub use procgen::{default_value, process_for};
pub use reduction::{run_schedule, session_steps, ScheduleMismatch};
pub use typecheck::{typecheck_process, typecheck_session, SessionTypeError, TypeError, VarContext};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ident::{Label, Role, Sort};

/// Runtime values. `Opaque` inhabits payload sorts with no built-in
/// representation (e.g. `Log`); it carries its sort.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Bool(bool),
    Str(String),
    Unit,
    Opaque(Sort),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::new("Int"),
            Value::Bool(_) => Sort::new("Bool"),
            Value::Str(_) => Sort::new("String"),
            Value::Unit => Sort::new("Unit"),
            Value::Opaque(s) => s.clone(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Unit => write!(f, "()"),
            Value::Opaque(s) => write!(f, "<{s}>"),
        }
    }
}

/// Expressions: literals, variables, and a little arithmetic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Lit(Value),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Lt(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("operator applied to {0}")]
    BadOperand(Value),
}

impl Expr {
    /// Evaluate under an environment binding variables to values; total on
    /// closed well-sorted expressions.
    pub fn eval(&self, env: &BTreeMap<String, Value>) -> Result<Value, EvalError> {
        match self {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(x) => env.get(x).cloned().ok_or_else(|| EvalError::Unbound(x.clone())),
            Expr::Add(a, b) => match (a.eval(env)?, b.eval(env)?) {
                (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a + b)),
                (v, _) => Err(EvalError::BadOperand(v)),
            },
            Expr::Lt(a, b) => match (a.eval(env)?, b.eval(env)?) {
                (Value::Int(a), Value::Int(b)) => Ok(Value::Bool(a < b)),
                (v, _) => Err(EvalError::BadOperand(v)),
            },
            Expr::Eq(a, b) => Ok(Value::Bool(a.eval(env)? == b.eval(env)?)),
            Expr::Not(a) => match a.eval(env)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                v => Err(EvalError::BadOperand(v)),
            },
        }
    }
}

/// A branch of an external choice: on `label`, bind the payload (if any) to
/// `binder` and continue. Binders carry their expected sort so that minimal
/// types can be synthesised.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PBranch {
    pub label: Label,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub binder: Option<(String, Sort)>,
    pub body: Process,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    /// Receive from `peer`, selecting the branch matching the message label;
    /// a `crash` branch handles the peer's detected crash.
    ExtChoice { peer: Role, branches: Vec<PBranch> },
    /// Send `label(expr)` to `peer` and continue; `label` is never `crash`.
    Output {
        peer: Role,
        label: Label,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        expr: Option<Expr>,
        cont: Box<Process>,
    },
    If { cond: Expr, then_p: Box<Process>, else_p: Box<Process> },
    Rec { var: String, body: Box<Process> },
    Var(String),
    /// Successful termination.
    Inact,
    /// Termination by failure.
    Crashed,
}

impl Process {
    pub fn substitute_proc(&self, var: &str, with: &Process) -> Process {
        match self {
            Process::ExtChoice { peer, branches } => Process::ExtChoice {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| PBranch {
                        label: b.label.clone(),
                        binder: b.binder.clone(),
                        body: b.body.substitute_proc(var, with),
                    })
                    .collect(),
            },
            Process::Output { peer, label, expr, cont } => Process::Output {
                peer: peer.clone(),
                label: label.clone(),
                expr: expr.clone(),
                cont: Box::new(cont.substitute_proc(var, with)),
            },
            Process::If { cond, then_p, else_p } => Process::If {
                cond: cond.clone(),
                then_p: Box::new(then_p.substitute_proc(var, with)),
                else_p: Box::new(else_p.substitute_proc(var, with)),
            },
            Process::Rec { var: v, body } => {
                if v == var {
                    self.clone()
                } else {
                    Process::Rec { var: v.clone(), body: Box::new(body.substitute_proc(var, with)) }
                }
            }
            Process::Var(v) => {
                if v == var {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            Process::Inact | Process::Crashed => self.clone(),
        }
    }

    /// Substitute a value for a payload variable in expressions.
    pub fn substitute_val(&self, var: &str, value: &Value) -> Process {
        fn subst_expr(e: &Expr, var: &str, value: &Value) -> Expr {
            match e {
                Expr::Lit(_) => e.clone(),
                Expr::Var(x) => {
                    if x == var {
                        Expr::Lit(value.clone())
                    } else {
                        e.clone()
                    }
                }
                Expr::Add(a, b) => Expr::Add(
                    Box::new(subst_expr(a, var, value)),
                    Box::new(subst_expr(b, var, value)),
                ),
                Expr::Lt(a, b) => Expr::Lt(
                    Box::new(subst_expr(a, var, value)),
                    Box::new(subst_expr(b, var, value)),
                ),
                Expr::Eq(a, b) => Expr::Eq(
                    Box::new(subst_expr(a, var, value)),
                    Box::new(subst_expr(b, var, value)),
                ),
                Expr::Not(a) => Expr::Not(Box::new(subst_expr(a, var, value))),
            }
        }
        match self {
            Process::ExtChoice { peer, branches } => Process::ExtChoice {
                peer: peer.clone(),
                branches: branches
                    .iter()
                    .map(|b| PBranch {
                        label: b.label.clone(),
                        binder: b.binder.clone(),
                        body: if b.binder.as_ref().map(|(x, _)| x == var).unwrap_or(false) {
                            b.body.clone()
                        } else {
                            b.body.substitute_val(var, value)
                        },
                    })
                    .collect(),
            },
            Process::Output { peer, label, expr, cont } => Process::Output {
                peer: peer.clone(),
                label: label.clone(),
                expr: expr.as_ref().map(|e| subst_expr(e, var, value)),
                cont: Box::new(cont.substitute_val(var, value)),
            },
            Process::If { cond, then_p, else_p } => Process::If {
                cond: subst_expr(cond, var, value),
                then_p: Box::new(then_p.substitute_val(var, value)),
                else_p: Box::new(else_p.substitute_val(var, value)),
            },
            Process::Rec { var: v, body } => Process::Rec {
                var: v.clone(),
                body: Box::new(body.substitute_val(var, value)),
            },
            Process::Var(_) | Process::Inact | Process::Crashed => self.clone(),
        }
    }

    /// Unfold a head recursion (structural congruence treats a recursion as
    /// equal to its unfolding).
    pub fn unfold_head(&self) -> Process {
        let mut p = self.clone();
        while let Process::Rec { var, body } = &p {
            p = body.substitute_proc(var, &p.clone());
        }
        p
    }
}

/// A message in an incoming queue: origin, label, optional payload.
pub type Msg = (Role, Label, Option<Value>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessQueue {
    Msgs(Vec<Msg>),
    Unavailable,
}

impl SessQueue {
    pub fn empty() -> Self {
        SessQueue::Msgs(Vec::new())
    }
}

/// A session: per-role process and incoming queue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub entries: BTreeMap<Role, (Process, SessQueue)>,
}

impl Session {
    pub fn new(entries: BTreeMap<Role, (Process, SessQueue)>) -> Self {
        Session { entries }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::ExtChoice { peer, branches } => {
                write!(f, "{peer}?{{")?;
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", b.label)?;
                    if let Some((x, s)) = &b.binder {
                        write!(f, "({x}:{s})")?;
                    }
                    write!(f, ".{}", b.body)?;
                }
                write!(f, "}}")
            }
            Process::Output { peer, label, expr, cont } => {
                write!(f, "{peer}!{label}")?;
                if let Some(e) = expr {
                    write!(f, "({e:?})")?;
                }
                write!(f, ".{cont}")
            }
            Process::If { cond, then_p, else_p } => {
                write!(f, "if {cond:?} then {then_p} else {else_p}")
            }
            Process::Rec { var, body } => write!(f, "mu {var}.{body}"),
            Process::Var(v) => write!(f, "{v}"),
            Process::Inact => write!(f, "0"),
            Process::Crashed => write!(f, "#"),
        }
    }
}
