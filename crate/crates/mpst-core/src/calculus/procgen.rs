//! Skeleton processes inhabiting local types, used to build test sessions.

use rand::Rng;

use crate::calculus::{Expr, PBranch, Process, Value};
use crate::ident::Sort;
use crate::local::LocalType;

/// The default inhabitant of a payload sort.
pub fn default_value(sort: &Sort) -> Value {
    match sort.as_str() {
        "Int" => Value::Int(0),
        "Bool" => Value::Bool(true),
        "String" => Value::Str(String::new()),
        "Unit" => Value::Unit,
        _ => Value::Opaque(sort.clone()),
    }
}

/// Build a process implementing `t`. Internal choices commit to one branch,
/// picked with `rng`, so different seeds exercise different selections;
/// outputs carry default literals.
pub fn process_for(t: &LocalType, rng: &mut impl Rng) -> Process {
    let mut fresh = 0usize;
    go(t, rng, &mut fresh)
}

fn go(t: &LocalType, rng: &mut impl Rng, fresh: &mut usize) -> Process {
    match t {
        LocalType::Internal { peer, branches } => {
            let pick = rng.gen_range(0..branches.len());
            let b = &branches[pick];
            Process::Output {
                peer: peer.clone(),
                label: b.label.clone(),
                expr: b.payload.as_ref().map(|s| Expr::Lit(default_value(s))),
                cont: Box::new(go(&b.cont, rng, fresh)),
            }
        }
        LocalType::External { peer, branches } => Process::ExtChoice {
            peer: peer.clone(),
            branches: branches
                .iter()
                .map(|b| PBranch {
                    label: b.label.clone(),
                    binder: b.payload.as_ref().map(|s| {
                        *fresh += 1;
                        (format!("x{fresh}"), s.clone())
                    }),
                    body: go(&b.cont, rng, fresh),
                })
                .collect(),
        },
        LocalType::Rec { var, body } => Process::Rec {
            var: var.to_string(),
            body: Box::new(go(body, rng, fresh)),
        },
        LocalType::Var(v) => Process::Var(v.to_string()),
        LocalType::End => Process::Inact,
        LocalType::Stop => Process::Crashed,
    }
}
