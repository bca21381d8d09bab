//! Coinductive subtyping on closed local types.
//!
//! `is_subtype(a, b)` holds when `a` can be used wherever `b` is expected.
//! Internal choices may lose branches on the subtype side; external choices
//! may gain them, subject to two crash-specific conditions: the supertype's
//! label set must not be exactly `{crash}` (a pure crash handling branch),
//! and the extra branches of the wider subtype must not introduce a `crash`
//! branch the supertype lacks. `stop` relates only to itself.
//!
//! Decided with the usual assumption-set algorithm over head-unfolded pairs,
//! keyed on name-independent canonical forms; termination follows from the
//! finite subterm closure of contractive types.

use std::collections::HashSet;

use crate::ident::Label;
use crate::local::LocalType;

/// Why a pair failed to be in the subtyping relation; `path` is the label
/// trail from the root to the offending pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtypeFailure {
    pub path: Vec<Label>,
    pub reason: String,
}

impl std::fmt::Display for SubtypeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "at the root: {}", self.reason)
        } else {
            let path =
                self.path.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(".");
            write!(f, "at {path}: {}", self.reason)
        }
    }
}

pub fn is_subtype(sub: &LocalType, sup: &LocalType) -> bool {
    explain_subtype(sub, sup).is_ok()
}

/// Like [`is_subtype`] but reports the first failing pair on failure.
pub fn explain_subtype(sub: &LocalType, sup: &LocalType) -> Result<(), SubtypeFailure> {
    let mut assumed = HashSet::new();
    go(sub, sup, &mut Vec::new(), &mut assumed)
}

fn go(
    sub: &LocalType,
    sup: &LocalType,
    path: &mut Vec<Label>,
    assumed: &mut HashSet<(String, String)>,
) -> Result<(), SubtypeFailure> {
    let sub = sub.unfold_head();
    let sup = sup.unfold_head();
    let key = (sub.canon_key(), sup.canon_key());
    if key.0 == key.1 || !assumed.insert(key) {
        return Ok(());
    }
    let fail = |path: &[Label], reason: String| Err(SubtypeFailure { path: path.to_vec(), reason });
    match (&sub, &sup) {
        (LocalType::End, LocalType::End) => Ok(()),
        (LocalType::Stop, LocalType::Stop) => Ok(()),
        (
            LocalType::Internal { peer: p1, branches: bs1 },
            LocalType::Internal { peer: p2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return fail(path, format!("internal choices towards {p1} vs {p2}"));
            }
            // Sub-(+): the subtype may have fewer branches.
            for b1 in bs1 {
                let Some(b2) = bs2.iter().find(|b2| b2.label == b1.label) else {
                    return fail(path, format!("selection label {} missing on the supertype side", b1.label));
                };
                if b1.payload != b2.payload {
                    return fail(path, format!("label {} carries different payload sorts", b1.label));
                }
                path.push(b1.label.clone());
                let r = go(&b1.cont, &b2.cont, path, assumed);
                path.pop();
                r?;
            }
            Ok(())
        }
        (
            LocalType::External { peer: p1, branches: bs1 },
            LocalType::External { peer: p2, branches: bs2 },
        ) => {
            if p1 != p2 {
                return fail(path, format!("external choices from {p1} vs {p2}"));
            }
            // Sub-&: the subtype may have more branches...
            if bs2.len() == 1 && bs2[0].label.is_crash() {
                // ...but the supertype may not be a pure crash handling branch
                return fail(path, "supertype is a pure crash handling branch".into());
            }
            for b2 in bs2 {
                let Some(b1) = bs1.iter().find(|b1| b1.label == b2.label) else {
                    return fail(path, format!("branching label {} missing on the subtype side", b2.label));
                };
                if b1.payload != b2.payload {
                    return fail(path, format!("label {} carries different payload sorts", b2.label));
                }
                path.push(b2.label.clone());
                let r = go(&b1.cont, &b2.cont, path, assumed);
                path.pop();
                r?;
            }
            // ...and the widened side may not add a crash branch the
            // supertype lacks.
            for b1 in bs1 {
                if b1.label.is_crash() && !bs2.iter().any(|b2| b2.label.is_crash()) {
                    return fail(path, "subtype adds a crash handling branch the supertype lacks".into());
                }
            }
            Ok(())
        }
        (a, b) => fail(path, format!("incompatible shapes {a} and {b}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::LBranch;

    fn ext(peer: &str, branches: Vec<LBranch>) -> LocalType {
        LocalType::external(peer, branches)
    }

    fn int(peer: &str, branches: Vec<LBranch>) -> LocalType {
        LocalType::internal(peer, branches)
    }

    fn br(label: &str, cont: LocalType) -> LBranch {
        LBranch::new(label, None, cont)
    }

    #[test]
    fn end_and_stop() {
        assert!(is_subtype(&LocalType::End, &LocalType::End));
        assert!(is_subtype(&LocalType::Stop, &LocalType::Stop));
        assert!(!is_subtype(&LocalType::Stop, &LocalType::End));
        assert!(!is_subtype(&LocalType::End, &LocalType::Stop));
    }

    #[test]
    fn internal_fewer_branches() {
        let narrow = int("p", vec![br("l1", LocalType::End)]);
        let wide = int("p", vec![br("l1", LocalType::End), br("l2", LocalType::End)]);
        assert!(is_subtype(&narrow, &wide));
        assert!(!is_subtype(&wide, &narrow));
    }

    #[test]
    fn external_more_branches() {
        let narrow = ext("p", vec![br("l", LocalType::End)]);
        let wide = ext("p", vec![br("l", LocalType::End), br("m", LocalType::End)]);
        assert!(is_subtype(&wide, &narrow));
        assert!(!is_subtype(&narrow, &wide));
    }

    #[test]
    fn extra_crash_branch_on_subtype_is_rejected() {
        // The supertype has no crash branch, so the widened subtype may not
        // introduce one: the handler could fire and leave the protocol.
        let with_crash = ext("p", vec![br("l", LocalType::End), br("crash", LocalType::End)]);
        let without = ext("p", vec![br("l", LocalType::End)]);
        assert!(!is_subtype(&with_crash, &without));
        assert!(!is_subtype(&without, &with_crash));
        // Both carrying the crash branch is fine.
        let wider = ext(
            "p",
            vec![br("l", LocalType::End), br("m", LocalType::End), br("crash", LocalType::End)],
        );
        assert!(is_subtype(&wider, &with_crash));
    }

    #[test]
    fn pure_crash_supertype_rejected() {
        let pure = ext("p", vec![br("crash", LocalType::End)]);
        let wide = ext("p", vec![br("l", LocalType::End), br("crash", LocalType::End)]);
        assert!(!is_subtype(&wide, &pure));
    }

    #[test]
    fn unfold_compatibility() {
        let t = LocalType::rec("t", LocalType::send("p", "l", None, LocalType::var("t")));
        let unfolded = t.unfold_once();
        assert!(is_subtype(&t, &unfolded));
        assert!(is_subtype(&unfolded, &t));
    }

    #[test]
    fn reflexive_on_recursive_types() {
        let t = LocalType::rec(
            "t",
            ext(
                "p",
                vec![
                    br("a", LocalType::var("t")),
                    br("b", LocalType::send("q", "x", None, LocalType::var("t"))),
                    br("crash", LocalType::End),
                ],
            ),
        );
        assert!(is_subtype(&t, &t));
    }

    #[test]
    fn explain_reports_path() {
        let sub = ext("p", vec![br("l", int("q", vec![br("x", LocalType::End)]))]);
        let sup = ext("p", vec![br("l", int("q", vec![br("y", LocalType::End)]))]);
        let failure = explain_subtype(&sub, &sup).unwrap_err();
        assert_eq!(failure.path, vec![Label::new("l")]);
    }
}
