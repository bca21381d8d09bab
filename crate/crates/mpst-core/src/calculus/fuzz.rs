//! Randomised schedule execution with crash injection, tracking the
//! governing global type. Used by the simulator and by the soundness test
//! suites: after every step the session must stay typable by the reached
//! annotated global type, and any stuck session must consist solely of
//! terminated or crashed entries.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{
    congruence_normalize, process_for, session_steps, typecheck_session, Process, SessQueue,
    Session,
};
use crate::global::GlobalType;
use crate::ident::Role;
use crate::projection::project;
use crate::semantics::{global_steps, AnnotatedGlobal, TransitionLabel};

#[derive(Clone, Copy, Debug)]
pub struct FuzzParams {
    pub runs: u32,
    pub seed: u64,
    /// Per-step crash probability for each live unreliable role.
    pub crash_rate: f64,
    /// Maximum steps per run.
    pub horizon: u32,
    /// Check session fidelity at every n-th step (0 disables).
    pub fidelity_every: u32,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams { runs: 1000, seed: 0, crash_rate: 0.1, horizon: 48, fidelity_every: 8 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct FuzzOutcome {
    pub runs: u32,
    pub steps: u64,
    /// Runs that ended with no enabled reduction.
    pub stuck_runs: u32,
    /// Stuck sessions violating deadlock-freedom (non-idle entries left).
    pub deadlocks: Vec<String>,
    /// Steps after which the session was no longer typable by the tracked
    /// global type, or the global type could not follow the step.
    pub subject_reduction_failures: Vec<String>,
    /// States where the global type could step but the session could not be
    /// driven to match.
    pub fidelity_failures: Vec<String>,
}

impl FuzzOutcome {
    pub fn is_clean(&self) -> bool {
        self.subject_reduction_failures.is_empty()
            && self.deadlocks.is_empty()
            && self.fidelity_failures.is_empty()
    }
}

/// Build the initial session for a protocol: one generated process per role,
/// empty queues.
pub fn initial_session(
    g: &GlobalType,
    roles: &BTreeSet<Role>,
    reliable: &BTreeSet<Role>,
    rng: &mut impl Rng,
) -> Result<Session, crate::projection::ProjectionError> {
    let mut entries = BTreeMap::new();
    for role in roles {
        let t = project(g, role, reliable)?;
        entries.insert(role.clone(), (process_for(&t, rng), SessQueue::empty()));
    }
    Ok(Session::new(entries))
}

pub fn subject_reduction_fuzz(
    g: &GlobalType,
    roles: &BTreeSet<Role>,
    reliable: &BTreeSet<Role>,
    params: &FuzzParams,
) -> FuzzOutcome {
    let mut outcome = FuzzOutcome { runs: params.runs, ..Default::default() };
    for run in 0..params.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(run as u64));
        let session = match initial_session(g, roles, reliable, &mut rng) {
            Ok(s) => s,
            Err(e) => {
                outcome
                    .subject_reduction_failures
                    .push(format!("run {run}: initial projection failed: {e}"));
                return outcome;
            }
        };
        run_one(run, g, reliable, session, params, &mut rng, &mut outcome);
    }
    outcome
}

fn run_one(
    run: u32,
    g: &GlobalType,
    reliable: &BTreeSet<Role>,
    session: Session,
    params: &FuzzParams,
    rng: &mut ChaCha8Rng,
    outcome: &mut FuzzOutcome,
) {
    let mut m = congruence_normalize(&session);
    let mut tracked = AnnotatedGlobal::new(g.clone());
    let mut trace: Vec<TransitionLabel> = Vec::new();

    for step in 0..params.horizon {
        let steps = session_steps(&m, reliable);
        if steps.is_empty() {
            outcome.stuck_runs += 1;
            // Deadlock-freedom: a stuck session is a parallel of inactive
            // entries with empty queues (erased by normalization) and
            // crashed entries with unavailable queues.
            for (role, (proc, queue)) in &m.entries {
                let idle_crashed = matches!(proc, Process::Crashed)
                    && matches!(queue, SessQueue::Unavailable);
                if !idle_crashed {
                    outcome.deadlocks.push(format!(
                        "run {run} step {step}: stuck with {role} at {proc} (trace: {})",
                        render(&trace)
                    ));
                    break;
                }
            }
            return;
        }

        // Crash injection: each live unreliable role crashes with the given
        // probability; otherwise pick a non-crash step uniformly.
        let crash_candidates: Vec<&(TransitionLabel, Session)> =
            steps.iter().filter(|(l, _)| l.is_crash()).collect();
        let mut taken: Option<&(TransitionLabel, Session)> = None;
        for candidate in crash_candidates {
            if rng.gen_bool(params.crash_rate) {
                taken = Some(candidate);
                break;
            }
        }
        if taken.is_none() {
            let normal: Vec<&(TransitionLabel, Session)> =
                steps.iter().filter(|(l, _)| !l.is_crash()).collect();
            taken = if normal.is_empty() {
                // Only crashes remain enabled; take one rather than spin.
                steps.first()
            } else {
                Some(normal[rng.gen_range(0..normal.len())])
            };
        }
        let (label, next) = taken.expect("non-empty steps");
        outcome.steps += 1;
        trace.push(label.clone());

        // Track the governing global type: conditionals leave it unchanged,
        // everything else must be matched by a global step with this label.
        if !matches!(label, TransitionLabel::Cond { .. }) {
            match global_steps(&tracked, reliable).into_iter().find(|s| &s.label == label) {
                Some(gstep) => tracked = gstep.next,
                None => {
                    outcome.subject_reduction_failures.push(format!(
                        "run {run} step {step}: global {} cannot follow {label} (trace: {})",
                        tracked,
                        render(&trace)
                    ));
                    return;
                }
            }
        }
        m = next.clone();

        if let Err(e) = typecheck_session(&tracked, &m, reliable) {
            outcome.subject_reduction_failures.push(format!(
                "run {run} step {step}: session not typable by {}: {e} (trace: {})",
                tracked,
                render(&trace)
            ));
            return;
        }

        if params.fidelity_every > 0 && step % params.fidelity_every == 0 {
            if let Some(problem) = fidelity_gap(&tracked, &m, reliable) {
                outcome.fidelity_failures.push(format!(
                    "run {run} step {step}: {problem} (trace: {})",
                    render(&trace)
                ));
                return;
            }
        }
    }
}

/// Session fidelity, spot-checked: if the tracked global type can step, the
/// session can be driven (within a few steps) to perform one of the enabled
/// global actions.
fn fidelity_gap(
    tracked: &AnnotatedGlobal,
    m: &Session,
    reliable: &BTreeSet<Role>,
) -> Option<String> {
    let glabels: BTreeSet<TransitionLabel> =
        global_steps(tracked, reliable).into_iter().map(|s| s.label).collect();
    if glabels.is_empty() {
        return None;
    }
    // Breadth-first over session steps, small depth.
    let mut frontier = vec![m.clone()];
    for _ in 0..3 {
        let mut next_frontier = Vec::new();
        for state in &frontier {
            for (label, next) in session_steps(state, reliable) {
                if glabels.contains(&label) {
                    return None;
                }
                next_frontier.push(next);
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        next_frontier.truncate(64);
        frontier = next_frontier;
    }
    Some(format!(
        "global can take one of [{}] but the session cannot be driven to match",
        glabels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
    ))
}

fn render(trace: &[TransitionLabel]) -> String {
    trace.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
}
