//! Labelled transition semantics for global types and configurations.

mod config_lts;
mod explore;
mod global_lts;

pub use config_lts::{config_steps, StepMode};
pub use explore::{explore_configs, replay, ConfigGraph, ExploreBounds};
pub use global_lts::{global_steps, GlobalStep};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::global::GlobalType;
use crate::ident::{Label, Role, Sort};
use crate::local::LocalType;
use crate::projection::{project, ProjectionError};

/// Actions shared by the global-type LTS, the configuration LTS, and the
/// session calculus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum TransitionLabel {
    /// `from` sends `label(payload)` to `to`.
    Send { from: Role, to: Role, label: Label, payload: Option<Sort> },
    /// `by` receives `label(payload)` from `from`.
    Recv { by: Role, from: Role, label: Label, payload: Option<Sort> },
    /// `role` crashes.
    Crash { role: Role },
    /// `by` detects the crash of `of`.
    CrashDetect { by: Role, of: Role },
    /// `role` resolves a conditional (session calculus only; neither type
    /// LTS emits this label).
    Cond { role: Role },
}

impl TransitionLabel {
    /// The role performing the action.
    pub fn subject(&self) -> &Role {
        match self {
            TransitionLabel::Send { from, .. } => from,
            TransitionLabel::Recv { by, .. } => by,
            TransitionLabel::Crash { role } => role,
            TransitionLabel::CrashDetect { by, .. } => by,
            TransitionLabel::Cond { role } => role,
        }
    }

    pub fn is_crash(&self) -> bool {
        matches!(self, TransitionLabel::Crash { .. })
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn payload(p: &Option<Sort>) -> String {
            p.as_ref().map(|s| format!("({s})")).unwrap_or_default()
        }
        match self {
            TransitionLabel::Send { from, to, label, payload: p } => {
                write!(f, "{from}!{to}:{label}{}", payload(p))
            }
            TransitionLabel::Recv { by, from, label, payload: p } => {
                write!(f, "{by}?{from}:{label}{}", payload(p))
            }
            TransitionLabel::Crash { role } => write!(f, "crash {role}"),
            TransitionLabel::CrashDetect { by, of } => write!(f, "{by} detects {of}"),
            TransitionLabel::Cond { role } => write!(f, "cond {role}"),
        }
    }
}

/// A global type annotated with the set of roles known to have crashed.
/// The set is genuine bookkeeping: it cannot be recovered from the type
/// once crashed roles have been pruned away.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedGlobal {
    pub crashed: BTreeSet<Role>,
    pub gtype: GlobalType,
}

impl AnnotatedGlobal {
    pub fn new(gtype: GlobalType) -> Self {
        AnnotatedGlobal { crashed: BTreeSet::new(), gtype }
    }

    pub fn with_crashed(crashed: BTreeSet<Role>, gtype: GlobalType) -> Self {
        AnnotatedGlobal { crashed, gtype }
    }

    pub fn is_well_annotated(&self, reliable: &BTreeSet<Role>) -> bool {
        crate::global::well_annotated(&self.crashed, &self.gtype, reliable)
    }

    pub fn state_key(&self) -> String {
        let mut key = String::new();
        for r in &self.crashed {
            key.push_str(r.as_str());
            key.push(',');
        }
        key.push('|');
        key.push_str(&self.gtype.canon_key());
        key
    }
}

impl fmt::Display for AnnotatedGlobal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({{")?;
        for (i, r) in self.crashed.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, "}}, {})", self.gtype)
    }
}

/// A peer-to-peer queue: an ordered message sequence, or unavailable once
/// the receiving role has crashed. Appending to an unavailable queue loses
/// the message.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "queue", rename_all = "snake_case")]
pub enum Queue {
    Available { msgs: Vec<(Label, Option<Sort>)> },
    Unavailable,
}

impl Queue {
    pub fn empty() -> Queue {
        Queue::Available { msgs: Vec::new() }
    }

    pub fn is_empty_available(&self) -> bool {
        matches!(self, Queue::Available { msgs } if msgs.is_empty())
    }

    pub fn len(&self) -> usize {
        match self {
            Queue::Available { msgs } => msgs.len(),
            Queue::Unavailable => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, label: Label, payload: Option<Sort>) {
        if let Queue::Available { msgs } = self {
            msgs.push((label, payload));
        }
        // Unavailable absorbs the message.
    }

    pub fn head(&self) -> Option<&(Label, Option<Sort>)> {
        match self {
            Queue::Available { msgs } => msgs.first(),
            Queue::Unavailable => None,
        }
    }
}

/// A configuration: a typing context plus a queue environment over the
/// ordered pairs of distinct roles in the context's domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub ctx: std::collections::BTreeMap<Role, LocalType>,
    pub queues: std::collections::BTreeMap<(Role, Role), Queue>,
}

impl Configuration {
    /// Build a configuration with the given typing context and all queues
    /// empty.
    pub fn with_empty_queues(ctx: std::collections::BTreeMap<Role, LocalType>) -> Self {
        let mut queues = std::collections::BTreeMap::new();
        for p in ctx.keys() {
            for q in ctx.keys() {
                if p != q {
                    queues.insert((p.clone(), q.clone()), Queue::empty());
                }
            }
        }
        Configuration { ctx, queues }
    }

    /// The configuration associated with a design-time global type by
    /// projection: every role of `roles` is mapped to its projection and all
    /// queues start empty.
    pub fn projected(
        g: &GlobalType,
        roles: &BTreeSet<Role>,
        reliable: &BTreeSet<Role>,
    ) -> Result<Self, ProjectionError> {
        let mut ctx = std::collections::BTreeMap::new();
        for r in roles {
            ctx.insert(r.clone(), project(g, r, reliable)?);
        }
        Ok(Configuration::with_empty_queues(ctx))
    }

    pub fn queue(&self, from: &Role, to: &Role) -> &Queue {
        static EMPTY: Queue = Queue::Available { msgs: Vec::new() };
        self.queues.get(&(from.clone(), to.clone())).unwrap_or(&EMPTY)
    }

    /// Make every queue delivering into `role` unavailable.
    pub fn make_unavailable_into(&mut self, role: &Role) {
        for ((_, to), q) in self.queues.iter_mut() {
            if to == role {
                *q = Queue::Unavailable;
            }
        }
    }

    /// Canonical key: roles in order, local types in de Bruijn canonical
    /// form, queues as explicit sequences.
    pub fn state_key(&self) -> String {
        use std::fmt::Write;
        let mut key = String::new();
        for (r, t) in &self.ctx {
            let _ = write!(key, "{r}={};", t.canon_key());
        }
        key.push('|');
        for ((p, q), queue) in &self.queues {
            let _ = write!(key, "{p}>{q}:");
            match queue {
                Queue::Unavailable => key.push('#'),
                Queue::Available { msgs } => {
                    for (l, s) in msgs {
                        let _ = write!(key, "{l}");
                        if let Some(s) = s {
                            let _ = write!(key, "({s})");
                        }
                        key.push(',');
                    }
                }
            }
            key.push(';');
        }
        key
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (r, t)) in self.ctx.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{r}: {t}")?;
        }
        let mut first = true;
        for ((p, q), queue) in &self.queues {
            if queue.is_empty_available() {
                continue;
            }
            if first {
                write!(f, " | ")?;
                first = false;
            } else {
                write!(f, ", ")?;
            }
            match queue {
                Queue::Unavailable => write!(f, "{p}>{q}: unavailable")?,
                Queue::Available { msgs } => {
                    write!(f, "{p}>{q}: [")?;
                    for (i, (l, _)) in msgs.iter().enumerate() {
                        if i > 0 {
                            write!(f, " ")?;
                        }
                        write!(f, "{l}")?;
                    }
                    write!(f, "]")?;
                }
            }
        }
        Ok(())
    }
}
