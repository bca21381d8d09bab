//! Association checking and bounded verification of safety,
//! deadlock-freedom, and liveness.

mod association;
mod correspondence;
mod deadlock;
mod liveness;
mod safety;

pub use association::{check_association, AssociationFailure, AssociationWitness};
pub use correspondence::check_correspondence;
pub use deadlock::check_deadlock_freedom;
pub use liveness::check_liveness;
pub use safety::check_safety;

use serde::{Deserialize, Serialize};

use crate::semantics::TransitionLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    /// No verdict: the bounds cut the exploration off before anything could
    /// be established (e.g. the initial state itself is out of bounds).
    Truncated,
}

/// Outcome of one property check. `truncation_frontiers` counts states with
/// successors beyond the exploration bounds; a violation always comes with a
/// counterexample trace that replays from the initial state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub property: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterexample: Option<Vec<TransitionLabel>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
    pub explored_states: usize,
    pub truncation_frontiers: usize,
}

impl VerificationReport {
    pub fn holds(property: &str, explored: usize, frontiers: usize) -> Self {
        VerificationReport {
            property: property.to_string(),
            verdict: Verdict::Holds,
            counterexample: None,
            detail: None,
            explored_states: explored,
            truncation_frontiers: frontiers,
        }
    }

    pub fn violated(
        property: &str,
        trace: Vec<TransitionLabel>,
        detail: String,
        explored: usize,
        frontiers: usize,
    ) -> Self {
        VerificationReport {
            property: property.to_string(),
            verdict: Verdict::Violated,
            counterexample: Some(trace),
            detail: Some(detail),
            explored_states: explored,
            truncation_frontiers: frontiers,
        }
    }
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = match self.verdict {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Truncated => "truncated",
        };
        write!(
            f,
            "{}: {} ({} states, {} truncation frontiers)",
            self.property, verdict, self.explored_states, self.truncation_frontiers
        )?;
        if let Some(detail) = &self.detail {
            write!(f, "\n  {detail}")?;
        }
        if let Some(trace) = &self.counterexample {
            let rendered =
                trace.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
            write!(f, "\n  counterexample: [{rendered}]")?;
        }
        Ok(())
    }
}
