//! Multiparty session types with crash-stop failures.
//!
//! This crate implements a toolchain for designing and verifying asynchronous
//! multiparty protocols in which unreliable participants may crash at any
//! time and never recover. Receivers detect crashes of their peers and take
//! dedicated `crash` handling branches.
//!
//! The pipeline is the classic top-down one:
//!
//! 1. a protocol written in an extended Scribble-style language is parsed
//!    into a [`global::GlobalType`] together with its set of reliable roles
//!    ([`parser`]);
//! 2. the global type is projected onto each role, yielding
//!    [`local::LocalType`]s; projection uses the full merge operator and
//!    insists on crash handling branches wherever an unreliable peer is the
//!    sender ([`projection`]);
//! 3. both the global type and the configuration (local types plus
//!    peer-to-peer queues) are given labelled transition semantics
//!    ([`semantics`]), related by an association invariant and checked for
//!    safety, deadlock-freedom, and liveness on bounded state spaces
//!    ([`verify`]);
//! 4. a session calculus interpreter with crash injection executes processes
//!    against the typing discipline ([`calculus`]);
//! 5. endpoint skeletons with correct channel wiring are generated from
//!    annotated projections ([`codegen`]).

pub mod analyze;
pub mod calculus;
pub mod codegen;
pub mod corpus;
pub mod global;
pub mod ident;
pub mod local;
pub mod parser;
pub mod projection;
pub mod semantics;
pub mod subtyping;
pub mod verify;

pub use global::GlobalType;
pub use ident::{Label, RecVar, Role, Sort};
pub use local::LocalType;
