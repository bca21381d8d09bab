//! Structural-congruence normal forms for sessions.

use crate::calculus::{Msg, Process, SessQueue, Session};

/// Rewrite a session to a canonical representative of its congruence class:
/// idle entries (inactive process, empty queue) are dropped, participants
/// are kept sorted by role, and each queue is rewritten to the canonical
/// interleaving that preserves per-origin order while sorting cross-origin
/// runs by origin (messages from different origins commute). Recursions stay
/// folded.
pub fn congruence_normalize(m: &Session) -> Session {
    let mut entries = std::collections::BTreeMap::new();
    for (role, (proc, queue)) in &m.entries {
        let queue = match queue {
            SessQueue::Unavailable => SessQueue::Unavailable,
            SessQueue::Msgs(msgs) => {
                let mut sorted: Vec<Msg> = msgs.clone();
                // Stable by origin: per-origin order is observable, the
                // interleaving across origins is not.
                sorted.sort_by(|a, b| a.0.cmp(&b.0));
                SessQueue::Msgs(sorted)
            }
        };
        if matches!(proc, Process::Inact) && matches!(&queue, SessQueue::Msgs(m) if m.is_empty()) {
            continue;
        }
        entries.insert(role.clone(), (proc.clone(), queue));
    }
    Session { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ident::{Label, Role};

    fn r(s: &str) -> Role {
        Role::new(s)
    }

    #[test]
    fn idle_entries_are_dropped() {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(r("p"), (Process::Inact, SessQueue::empty()));
        entries.insert(r("q"), (Process::Crashed, SessQueue::Unavailable));
        let m = congruence_normalize(&Session::new(entries));
        assert_eq!(m.entries.len(), 1);
        assert!(m.entries.contains_key(&r("q")));
    }

    #[test]
    fn cross_origin_messages_sort_by_origin() {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(
            r("p"),
            (
                Process::Inact,
                SessQueue::Msgs(vec![
                    (r("z"), Label::new("a"), None),
                    (r("q"), Label::new("b"), None),
                    (r("z"), Label::new("c"), None),
                ]),
            ),
        );
        let m = congruence_normalize(&Session::new(entries));
        let SessQueue::Msgs(msgs) = &m.entries[&r("p")].1 else { panic!() };
        let rendered: Vec<(String, String)> =
            msgs.iter().map(|(o, l, _)| (o.to_string(), l.to_string())).collect();
        // q's message first; z's two messages keep their relative order.
        assert_eq!(
            rendered,
            vec![
                ("q".into(), "b".into()),
                ("z".into(), "a".into()),
                ("z".into(), "c".into())
            ]
        );
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut entries = std::collections::BTreeMap::new();
        entries.insert(
            r("p"),
            (
                Process::Inact,
                SessQueue::Msgs(vec![
                    (r("z"), Label::new("a"), None),
                    (r("q"), Label::new("b"), None),
                ]),
            ),
        );
        entries.insert(r("x"), (Process::Inact, SessQueue::empty()));
        let m = Session::new(entries);
        let once = congruence_normalize(&m);
        let twice = congruence_normalize(&once);
        assert_eq!(once, twice);
    }
}
