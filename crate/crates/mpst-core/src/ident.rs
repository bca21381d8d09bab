//! Interned-ish identifier newtypes shared across the crate.
//!
//! Roles, message labels, payload sorts, and recursion variables are all
//! plain identifiers with equality and ordering. Payload sorts are opaque:
//! two sorts are compatible iff they are the same identifier.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

macro_rules! ident_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(s: impl AsRef<str>) -> Self {
                Self(Arc::from(s.as_ref()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(Arc::from(s))
            }
        }
    };
}

ident_newtype! {
    /// A protocol participant.
    Role
}

ident_newtype! {
    /// A message label. The label `crash` is reserved for crash handling
    /// branches and can never be sent by a process.
    Label
}

ident_newtype! {
    /// An opaque payload sort (`Int`, `String`, `Log`, ...). Compared by
    /// identity only; there is no subtyping between sorts.
    Sort
}

ident_newtype! {
    /// A recursion variable (`t0`, `t1`, ... in surface syntax).
    RecVar
}

impl Label {
    /// The reserved pseudo-label selected when a peer's crash is detected.
    pub fn crash() -> Label {
        Label::new("crash")
    }

    pub fn is_crash(&self) -> bool {
        self.as_str() == "crash"
    }
}
